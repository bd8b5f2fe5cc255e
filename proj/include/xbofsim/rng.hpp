#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>

namespace xbofsim {

// xoshiro256** seeded via splitmix64. One stream per named decision site so
// that adding a site never perturbs draws made elsewhere.
class RngStream {
 public:
  RngStream() : RngStream(0) {}
  explicit RngStream(std::uint64_t seed);

  std::uint64_t next_u64();

  // Uniform in [0,1), 53-bit resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

  double exponential(double mean);

 private:
  std::uint64_t s_[4];
};

class RngPool {
 public:
  explicit RngPool(std::uint64_t seed) : seed_(seed) {}

  RngStream& stream(std::string_view name);

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  std::map<std::string, RngStream, std::less<>> streams_;
};

// Deterministic 64-bit mixer, used for spatial sampling and stream derivation.
std::uint64_t mix64(std::uint64_t x);

std::uint64_t fnv1a64(std::string_view s);

}  // namespace xbofsim
