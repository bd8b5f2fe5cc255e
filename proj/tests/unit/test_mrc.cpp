#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <list>
#include <map>
#include <vector>

#include "xbofsim/mrc.hpp"
#include "xbofsim/rng.hpp"

using namespace xbofsim;

namespace {

// Independent oracle: exact LRU stack-distance MRC via a brute-force
// recency list. O(N*M), fine at test scale.
MrcEstimate exact_mrc(const std::vector<std::uint64_t>& trace,
                      std::size_t max_segments) {
  std::list<std::uint64_t> stack;
  std::map<std::uint64_t, std::uint64_t> hist;
  std::uint64_t cold = 0;
  for (const auto region : trace) {
    std::size_t depth = 0;
    bool found = false;
    for (auto it = stack.begin(); it != stack.end(); ++it) {
      ++depth;
      if (*it == region) {
        hist[depth]++;
        stack.erase(it);
        found = true;
        break;
      }
    }
    if (!found) ++cold;
    stack.push_front(region);
  }
  MrcEstimate out;
  out.samples = trace.size();
  out.miss_ratio.assign(max_segments + 1, 1.0);
  std::uint64_t within = 0;
  auto it = hist.begin();
  for (std::size_t c = 0; c <= max_segments; ++c) {
    while (it != hist.end() && it->first <= c) {
      within += it->second;
      ++it;
    }
    out.miss_ratio[c] = static_cast<double>(out.samples - within) /
                        static_cast<double>(out.samples);
  }
  return out;
}

std::vector<std::uint64_t> zipf_trace(std::size_t n, std::size_t universe,
                                      double theta, std::uint64_t seed) {
  // Inverse-CDF Zipf over a modest universe; regions shuffled by mix64 so
  // popularity is not correlated with region id.
  std::vector<double> cdf(universe);
  double sum = 0;
  for (std::size_t i = 0; i < universe; ++i) {
    sum += 1.0 / std::pow(static_cast<double>(i + 1), theta);
    cdf[i] = sum;
  }
  for (auto& c : cdf) c /= sum;
  RngStream rng(seed);
  std::vector<std::uint64_t> trace(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double u = rng.uniform();
    const auto it = std::lower_bound(cdf.begin(), cdf.end(), u);
    const auto rank = static_cast<std::uint64_t>(it - cdf.begin());
    trace[i] = mix64(rank + 1) % (universe * 16);
  }
  return trace;
}

}  // namespace

TEST_CASE("MRC invariants: nonincreasing, starts at 1") {
  ShardsEstimator est(1.0);
  RngStream rng(5);
  for (int i = 0; i < 5'000; ++i) est.access(rng.below(64));
  const auto mrc = est.estimate(100);
  REQUIRE(mrc.miss_ratio[0] == 1.0);
  for (std::size_t c = 1; c < mrc.miss_ratio.size(); ++c)
    REQUIRE(mrc.miss_ratio[c] <= mrc.miss_ratio[c - 1]);
}

TEST_CASE("at rate 1.0 the estimate equals the exact stack-distance MRC") {
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    RngStream rng(seed);
    const std::size_t universe = 8 + rng.below(60);
    std::vector<std::uint64_t> trace(10'000);
    for (auto& r : trace) {
      // Mix of uniform and scan-like phases to vary the reuse structure.
      if (rng.uniform() < 0.3) {
        r = (seed * 31 + rng.below(universe / 2 + 1)) % universe;
      } else {
        r = rng.below(universe);
      }
    }
    ShardsEstimator est(1.0);
    for (const auto r : trace) est.access(r);
    const auto got = est.estimate(universe + 4);
    const auto want = exact_mrc(trace, universe + 4);
    REQUIRE(got.samples == want.samples);
    for (std::size_t c = 0; c < want.miss_ratio.size(); ++c)
      REQUIRE(got.miss_ratio[c] == doctest::Approx(want.miss_ratio[c]).epsilon(1e-12));
  }
}

TEST_CASE("rate 0.01 on a 1e6-reference zipf trace: MAE <= 0.05") {
  const std::size_t universe = 50'000;
  const auto trace = zipf_trace(1'000'000, universe, 0.9, 7);
  ShardsEstimator sampled(0.01);
  ShardsEstimator full(1.0);
  for (const auto r : trace) {
    sampled.access(r);
    full.access(r);
  }
  const std::size_t max_c = universe;
  const auto got = sampled.estimate(max_c);
  const auto want = full.estimate(max_c);
  double abs_err = 0;
  for (std::size_t c = 0; c <= max_c; ++c)
    abs_err += std::abs(got.miss_ratio[c] - want.miss_ratio[c]);
  const double mae = abs_err / static_cast<double>(max_c + 1);
  REQUIRE(mae <= 0.05);
}

TEST_CASE("flat MRC for uniform traffic over a huge footprint") {
  ShardsEstimator est(1.0);
  RngStream rng(11);
  for (int i = 0; i < 50'000; ++i) est.access(rng.below(1 << 20));
  const auto mrc = est.estimate(64);
  // Nearly every access is cold: the curve stays near 1 at small sizes.
  REQUIRE(mrc.miss_ratio[64] > 0.9);
}

TEST_CASE("cold estimator reports all-miss curve") {
  ShardsEstimator est(0.5);
  const auto mrc = est.estimate(16);
  REQUIRE(mrc.samples == 0);
  REQUIRE(mrc.at(16) == 1.0);
}
