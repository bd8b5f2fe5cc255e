#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "xbofsim/rng.hpp"
#include "xbofsim/time.hpp"

namespace xbofsim {

struct TraceRecord {
  std::int64_t timestamp_us = 0;
  std::uint32_t device = 0;
  bool is_write = false;
  std::int64_t offset = 0;  // bytes
  std::int64_t size = 0;    // bytes

  bool operator==(const TraceRecord&) const = default;
};

struct TraceLoadResult {
  std::vector<TraceRecord> records;  // timestamp order per device
  std::size_t malformed_lines = 0;
  std::size_t reordered = 0;  // records stable-sorted back into order
  std::vector<std::string> warnings;
};

// Schema: header "timestamp_us,device_id,op,offset,size"; op is R or W.
TraceLoadResult load_trace(std::istream& in);
TraceLoadResult load_trace_file(const std::string& path);
void save_trace(std::ostream& out, const std::vector<TraceRecord>& records);

enum class AccessPattern : std::uint8_t { Sequential, Uniform, Zipf };

struct SyntheticProfile {
  double read_ratio = 0.5;          // fraction of reads
  double mean_read_kb = 32.0;       // >= 4
  double mean_write_kb = 32.0;      // >= 4
  std::int64_t footprint_bytes = 1LL << 30;
  AccessPattern pattern = AccessPattern::Zipf;
  double zipf_theta = 0.99;
  double rate_iops = 10'000;  // arrival rate for open-loop generation

  void validate() const;
};

// Draws ops, sizes, and offsets for one device; used by both the open-loop
// generator and closed-loop drivers. Sizes are 4 KB-quantized exponentials
// whose quantized mean equals the profile mean exactly.
class SyntheticSampler {
 public:
  SyntheticSampler(const SyntheticProfile& profile, std::uint64_t seed);

  TraceRecord next();  // timestamp_us filled by callers that need it

 private:
  std::int64_t draw_size(double mean_bytes, double exp_mean);
  std::int64_t draw_offset(std::int64_t size);

  SyntheticProfile profile_;
  RngStream rng_;
  double read_exp_mean_;   // parameter of the underlying exponential
  double write_exp_mean_;
  std::int64_t cursor_ = 0;
  // Zipf over footprint pages (Gray et al. approximation).
  double zipf_zetan_ = 0, zipf_theta_ = 0, zipf_alpha_ = 0, zipf_eta_ = 0;
  std::int64_t zipf_n_ = 0;
};

std::vector<TraceRecord> generate(const SyntheticProfile& profile,
                                  Nanos duration, std::uint64_t seed,
                                  std::uint32_t device = 0);

// Closed-loop fio-style microbenchmark description.
struct MicrobenchSpec {
  bool sequential = true;
  bool is_write = false;
  std::int64_t io_bytes = 4096;  // multiple of 4 KB
  int iodepth = 1;
  std::int64_t span_bytes = 0;   // 0 = whole device
  Nanos stop_after = 0;          // 0 = run whole scenario

  void validate() const;
};

}  // namespace xbofsim
