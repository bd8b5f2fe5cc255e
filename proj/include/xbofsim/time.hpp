#pragma once

#include <cstdint>

namespace xbofsim {

// Simulated time is integer nanoseconds. Sub-ns costs are handled by
// DeciNanos below so that ordering stays exactly reproducible.
using Nanos = std::int64_t;

constexpr Nanos kMicro = 1'000;
constexpr Nanos kMilli = 1'000'000;
constexpr Nanos kSecond = 1'000'000'000;

// Charges a cost given in tenths of a nanosecond while keeping the clock
// integral. The running remainder guarantees that the long-run average of
// take() equals tenths/10 exactly (e.g. 1142 -> 114.2 ns).
class DeciNanos {
 public:
  constexpr DeciNanos() = default;
  constexpr explicit DeciNanos(std::int64_t tenths) : tenths_(tenths) {}

  Nanos take() {
    acc_ += tenths_;
    const Nanos whole = acc_ / 10;
    acc_ %= 10;
    return whole;
  }

  constexpr std::int64_t tenths() const { return tenths_; }

 private:
  std::int64_t tenths_ = 0;
  std::int64_t acc_ = 0;
};

// ceil(bytes / rate) where rate is given in bytes per second.
constexpr Nanos transfer_ns(std::int64_t bytes, std::int64_t bytes_per_s) {
  // bytes / (B/s) in ns = bytes * 1e9 / rate
  const __int128 num = static_cast<__int128>(bytes) * 1'000'000'000;
  return static_cast<Nanos>((num + bytes_per_s - 1) / bytes_per_s);
}

}  // namespace xbofsim
