#include "xbofsim/mrc.hpp"

#include <cmath>
#include <stdexcept>

#include "xbofsim/rng.hpp"

namespace xbofsim {

ShardsEstimator::ShardsEstimator(double sampling_rate) : rate_(sampling_rate) {
  if (!(rate_ > 0.0 && rate_ <= 1.0))
    throw std::invalid_argument("shards: rate must be in (0, 1]");
  threshold_ = static_cast<std::uint64_t>(rate_ * static_cast<double>(kModulus));
  if (threshold_ == 0) threshold_ = 1;
  tree_.assign(1024, 0);
}

bool ShardsEstimator::sampled(std::uint64_t region_id) const {
  if (rate_ >= 1.0) return true;
  return (mix64(region_id) % kModulus) < threshold_;
}

void ShardsEstimator::tree_add(std::size_t pos, int delta) {
  for (std::size_t i = pos + 1; i <= tree_.size(); i += i & (~i + 1))
    tree_[i - 1] += delta;
}

std::int64_t ShardsEstimator::tree_prefix(std::size_t pos) const {
  std::int64_t sum = 0;
  for (std::size_t i = pos + 1; i > 0; i -= i & (~i + 1)) sum += tree_[i - 1];
  return sum;
}

void ShardsEstimator::compact() {
  // Re-number live positions 0..n-1, preserving order.
  std::map<std::size_t, std::uint64_t> by_pos;
  for (const auto& [region, pos] : last_pos_) by_pos[pos] = region;
  tree_.assign(std::max<std::size_t>(1024, by_pos.size() * 2), 0);
  timeline_ = 0;
  for (const auto& [pos, region] : by_pos) {
    last_pos_[region] = timeline_;
    tree_add(timeline_, 1);
    ++timeline_;
  }
}

std::uint64_t ShardsEstimator::stack_distance(std::uint64_t region_id) {
  if (timeline_ >= tree_.size()) compact();
  const std::size_t pos = timeline_++;
  auto it = last_pos_.find(region_id);
  std::uint64_t distance = 0;
  if (it != last_pos_.end()) {
    // Regions whose latest access is strictly after our last access.
    const std::int64_t after = live_ - tree_prefix(it->second);
    distance = static_cast<std::uint64_t>(after) + 1;
    tree_add(it->second, -1);
    --live_;
    it->second = pos;
  } else {
    last_pos_.emplace(region_id, pos);
  }
  tree_add(pos, 1);
  ++live_;
  return distance;
}

void ShardsEstimator::access(std::uint64_t region_id) {
  ++total_refs_;
  if (region_id == last_region_) {
    if (last_region_sampled_) {
      ++histogram_[1];
      ++samples_;
    }
    return;
  }
  last_region_ = region_id;
  last_region_sampled_ = sampled(region_id);
  if (!last_region_sampled_) return;
  ++samples_;
  const std::uint64_t d = stack_distance(region_id);
  if (d == 0) {
    ++cold_;
    return;
  }
  const std::uint64_t scaled =
      rate_ >= 1.0
          ? d
          : static_cast<std::uint64_t>(
                std::llround(static_cast<double>(d) / rate_));
  ++histogram_[std::max<std::uint64_t>(scaled, 1)];
}

MrcEstimate ShardsEstimator::estimate(std::size_t max_segments) const {
  MrcEstimate out;
  out.samples = samples_;
  out.miss_ratio.assign(max_segments + 1, 1.0);
  if (samples_ == 0) return out;
  // Fixed-rate correction: hot regions that happened to dodge the spatial
  // filter skew the reference count, so the gap between the expected and the
  // actual sample count is credited to the smallest-distance bucket.
  const double expected = static_cast<double>(total_refs_) * rate_;
  const double adjust = rate_ < 1.0 ? expected - static_cast<double>(samples_) : 0.0;
  const double denom = static_cast<double>(samples_) + adjust;
  // misses(c) = cold + refs with distance > c
  double within = 0;  // refs with distance <= c
  auto it = histogram_.begin();
  for (std::size_t c = 0; c <= max_segments; ++c) {
    if (c == 1) within += adjust;  // the correction credits distance 1
    while (it != histogram_.end() && it->first <= c) {
      within += static_cast<double>(it->second);
      ++it;
    }
    const double mr = (denom - within) / denom;
    out.miss_ratio[c] = std::min(1.0, std::max(0.0, mr));
  }
  // Keep the curve a valid nonincreasing step function after adjustment.
  for (std::size_t c = 1; c < out.miss_ratio.size(); ++c)
    out.miss_ratio[c] = std::min(out.miss_ratio[c], out.miss_ratio[c - 1]);
  return out;
}

void ShardsEstimator::reset() {
  last_pos_.clear();
  tree_.assign(1024, 0);
  timeline_ = 0;
  live_ = 0;
  histogram_.clear();
  cold_ = 0;
  samples_ = 0;
  total_refs_ = 0;
  last_region_ = ~0ULL;
  last_region_sampled_ = false;
}

}  // namespace xbofsim
