#pragma once

#include <cstdint>
#include <map>
#include <unordered_map>
#include <vector>

namespace xbofsim {

// Step-function miss ratio curve over segment-granular cache sizes.
struct MrcEstimate {
  std::vector<double> miss_ratio;  // index = cache size in segments
  std::uint64_t samples = 0;

  double at(std::size_t segments) const {
    if (miss_ratio.empty()) return 1.0;
    if (segments >= miss_ratio.size()) return miss_ratio.back();
    return miss_ratio[segments];
  }
};

// Online MRC estimation with fixed-rate spatial sampling (SHARDS): a region
// is tracked iff hash(region) mod P < T with T = rate * P, and sampled stack
// distances are rescaled by 1/rate. At rate 1.0 this degenerates to exact
// LRU stack-distance computation.
class ShardsEstimator {
 public:
  explicit ShardsEstimator(double sampling_rate);

  void access(std::uint64_t region_id);

  std::uint64_t sample_count() const { return samples_; }
  double rate() const { return rate_; }

  MrcEstimate estimate(std::size_t max_segments) const;

  void reset();

 private:
  static constexpr std::uint64_t kModulus = 1ULL << 24;

  bool sampled(std::uint64_t region_id) const;
  std::uint64_t stack_distance(std::uint64_t region_id);  // 0 = cold
  void compact();

  // Fenwick tree over the sampled-access timeline; one live bit per region
  // at its latest position.
  void tree_add(std::size_t pos, int delta);
  std::int64_t tree_prefix(std::size_t pos) const;  // sum of [0, pos]

  double rate_;
  std::uint64_t threshold_;
  std::unordered_map<std::uint64_t, std::size_t> last_pos_;
  std::vector<std::int32_t> tree_;
  std::size_t timeline_ = 0;
  std::int64_t live_ = 0;

  std::map<std::uint64_t, std::uint64_t> histogram_;  // scaled distance -> refs
  std::uint64_t cold_ = 0;
  std::uint64_t samples_ = 0;
  std::uint64_t total_refs_ = 0;

  std::uint64_t last_region_ = ~0ULL;
  bool last_region_sampled_ = false;
};

}  // namespace xbofsim
