#include "xbofsim/runtime.hpp"

#include <algorithm>

namespace xbofsim {

ComputeComplex::Reservation ComputeComplex::reserve(Nanos busy_ns,
                                                    Nanos earliest) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < free_at_.size(); ++i)
    if (free_at_[i] < free_at_[best]) best = i;
  const Nanos start = std::max(earliest, free_at_[best]);
  const Nanos end = start + busy_ns;
  free_at_[best] = end;
  account(start, end);
  return {start, end};
}

void ComputeComplex::account(Nanos start, Nanos end) {
  busy_total_ += end - start;
  if (window_ <= 0) return;
  std::size_t idx = static_cast<std::size_t>(start / window_);
  const std::size_t last = static_cast<std::size_t>((end - 1) / window_);
  if (bins_.size() <= last) bins_.resize(last + 1, 0);
  for (; idx <= last; ++idx) {
    const Nanos lo = std::max<Nanos>(start, static_cast<Nanos>(idx) * window_);
    const Nanos hi = std::min<Nanos>(end, static_cast<Nanos>(idx + 1) * window_);
    bins_[idx] += hi - lo;
  }
}

double ComputeComplex::window_utilization(std::int64_t idx) const {
  if (idx < 0 || static_cast<std::size_t>(idx) >= bins_.size()) return 0.0;
  return static_cast<double>(bins_[idx]) /
         (static_cast<double>(window_) * static_cast<double>(cores()));
}

}  // namespace xbofsim
