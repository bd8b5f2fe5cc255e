#include "xbofsim/workload.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace xbofsim {

namespace {

constexpr std::int64_t kPage = 4096;
constexpr const char* kHeader = "timestamp_us,device_id,op,offset,size";

}  // namespace

TraceLoadResult load_trace(std::istream& in) {
  TraceLoadResult out;
  std::string line;
  if (!std::getline(in, line)) return out;  // empty file: empty stream
  // Tolerate trailing CR from foreign tools.
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kHeader) {
    throw std::runtime_error("trace: line 1: expected header '" +
                             std::string(kHeader) + "', got '" + line + "'");
  }
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string ts, dev, op, off, size;
    const bool fields = std::getline(ss, ts, ',') && std::getline(ss, dev, ',') &&
                        std::getline(ss, op, ',') && std::getline(ss, off, ',') &&
                        std::getline(ss, size, ',');
    TraceRecord r;
    bool good = fields && (op == "R" || op == "W");
    if (good) {
      try {
        r.timestamp_us = std::stoll(ts);
        r.device = static_cast<std::uint32_t>(std::stoul(dev));
        r.is_write = op == "W";
        r.offset = std::stoll(off);
        r.size = std::stoll(size);
      } catch (const std::exception&) {
        good = false;
      }
    }
    if (!good || r.size <= 0) {
      ++out.malformed_lines;
      out.warnings.push_back("trace: line " + std::to_string(line_no) +
                             ": malformed record skipped");
      continue;
    }
    out.records.push_back(r);
  }
  // Per-device timestamps must be nondecreasing; out-of-order records are
  // stable-sorted back with a warning.
  bool ordered = true;
  {
    std::vector<std::int64_t> last(1, 0);
    std::vector<bool> seen(1, false);
    for (const auto& r : out.records) {
      if (r.device >= last.size()) {
        last.resize(r.device + 1, 0);
        seen.resize(r.device + 1, false);
      }
      if (seen[r.device] && r.timestamp_us < last[r.device]) {
        ordered = false;
        ++out.reordered;
      }
      last[r.device] = std::max(last[r.device], r.timestamp_us);
      seen[r.device] = true;
    }
  }
  if (!ordered) {
    std::stable_sort(out.records.begin(), out.records.end(),
                     [](const TraceRecord& a, const TraceRecord& b) {
                       return a.timestamp_us < b.timestamp_us;
                     });
    out.warnings.push_back("trace: timestamps out of order; stable-sorted");
  }
  return out;
}

TraceLoadResult load_trace_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("trace: cannot open " + path);
  return load_trace(in);
}

void save_trace(std::ostream& out, const std::vector<TraceRecord>& records) {
  out << kHeader << '\n';
  for (const auto& r : records) {
    out << r.timestamp_us << ',' << r.device << ',' << (r.is_write ? 'W' : 'R')
        << ',' << r.offset << ',' << r.size << '\n';
  }
}

void SyntheticProfile::validate() const {
  if (read_ratio < 0 || read_ratio > 1)
    throw std::invalid_argument("profile: read_ratio must be in [0,1]");
  if (mean_read_kb < 4 || mean_write_kb < 4)
    throw std::invalid_argument("profile: mean sizes must be >= 4 KB");
  if (footprint_bytes < kPage)
    throw std::invalid_argument("profile: footprint must hold at least one page");
}

namespace {

// Mean of 4 KB*(1+floor(X/4KB)) with X ~ Exp(mu) is 4KB + 4KB/(e^{4KB/mu}-1).
// Solving for the target mean keeps the quantized mean exact.
double exp_mean_for_target(double target_bytes) {
  const double h = static_cast<double>(kPage);
  if (target_bytes <= h) return 0;  // degenerate: always one page
  return h / std::log1p(h / (target_bytes - h));
}

}  // namespace

SyntheticSampler::SyntheticSampler(const SyntheticProfile& profile,
                                   std::uint64_t seed)
    : profile_(profile), rng_(mix64(seed ^ 0x776B6C64)) {
  profile_.validate();
  read_exp_mean_ = exp_mean_for_target(profile_.mean_read_kb * 1024.0);
  write_exp_mean_ = exp_mean_for_target(profile_.mean_write_kb * 1024.0);
  if (profile_.pattern == AccessPattern::Zipf) {
    zipf_n_ = std::max<std::int64_t>(1, profile_.footprint_bytes / kPage);
    zipf_theta_ = profile_.zipf_theta;
    double zeta2 = 0;
    for (int i = 1; i <= 2; ++i) zeta2 += 1.0 / std::pow(i, zipf_theta_);
    zipf_zetan_ = 0;
    for (std::int64_t i = 1; i <= zipf_n_; ++i)
      zipf_zetan_ += 1.0 / std::pow(static_cast<double>(i), zipf_theta_);
    zipf_alpha_ = 1.0 / (1.0 - zipf_theta_);
    zipf_eta_ = (1.0 - std::pow(2.0 / static_cast<double>(zipf_n_), 1.0 - zipf_theta_)) /
                (1.0 - zeta2 / zipf_zetan_);
  }
}

std::int64_t SyntheticSampler::draw_size(double mean_bytes, double exp_mean) {
  if (mean_bytes <= static_cast<double>(kPage) || exp_mean <= 0) return kPage;
  const double x = rng_.exponential(exp_mean);
  const auto steps = static_cast<std::int64_t>(x / static_cast<double>(kPage));
  return kPage * (1 + steps);
}

std::int64_t SyntheticSampler::draw_offset(std::int64_t size) {
  const std::int64_t pages = std::max<std::int64_t>(1, profile_.footprint_bytes / kPage);
  switch (profile_.pattern) {
    case AccessPattern::Sequential: {
      std::int64_t off = cursor_;
      if (off + size > pages * kPage) off = 0;
      cursor_ = off + size;
      return off;
    }
    case AccessPattern::Uniform:
      return static_cast<std::int64_t>(rng_.below(static_cast<std::uint64_t>(pages))) * kPage;
    case AccessPattern::Zipf: {
      const double u = rng_.uniform();
      const double uz = u * zipf_zetan_;
      std::int64_t rank;
      if (uz < 1.0) {
        rank = 0;
      } else if (uz < 1.0 + std::pow(0.5, zipf_theta_)) {
        rank = 1;
      } else {
        rank = static_cast<std::int64_t>(
            static_cast<double>(zipf_n_) *
            std::pow(zipf_eta_ * u - zipf_eta_ + 1.0, zipf_alpha_));
      }
      rank = std::clamp<std::int64_t>(rank, 0, zipf_n_ - 1);
      // Scatter ranks so popularity is not spatially clustered.
      const std::int64_t page = static_cast<std::int64_t>(
          mix64(static_cast<std::uint64_t>(rank)) % static_cast<std::uint64_t>(pages));
      return page * kPage;
    }
  }
  return 0;
}

TraceRecord SyntheticSampler::next() {
  TraceRecord r;
  r.is_write = rng_.uniform() >= profile_.read_ratio;
  r.size = draw_size((r.is_write ? profile_.mean_write_kb : profile_.mean_read_kb) * 1024.0,
                     r.is_write ? write_exp_mean_ : read_exp_mean_);
  r.offset = draw_offset(r.size);
  return r;
}

std::vector<TraceRecord> generate(const SyntheticProfile& profile,
                                  Nanos duration, std::uint64_t seed,
                                  std::uint32_t device) {
  profile.validate();
  SyntheticSampler sampler(profile, seed);
  RngStream arrivals(mix64(seed ^ 0x61727276));
  std::vector<TraceRecord> out;
  if (profile.rate_iops <= 0) return out;
  const double mean_gap_us = 1e6 / profile.rate_iops;
  double t_us = 0;
  const double end_us = static_cast<double>(duration) / 1000.0;
  while (true) {
    t_us += arrivals.exponential(mean_gap_us);
    if (t_us >= end_us) break;
    TraceRecord r = sampler.next();
    r.timestamp_us = static_cast<std::int64_t>(t_us);
    r.device = device;
    out.push_back(r);
  }
  return out;
}

void MicrobenchSpec::validate() const {
  if (io_bytes <= 0 || io_bytes % kPage != 0)
    throw std::invalid_argument("microbench: size must be a positive multiple of 4 KB");
  if (iodepth < 1) throw std::invalid_argument("microbench: iodepth must be >= 1");
}

}  // namespace xbofsim
