#pragma once

#include <cstdint>
#include <deque>
#include <vector>

#include "xbofsim/metrics.hpp"
#include "xbofsim/time.hpp"

namespace xbofsim {

// A bank of identical cores used as service stations. Reservations are
// non-preemptive and deterministic (least-loaded core, lowest index wins).
class ComputeComplex {
 public:
  ComputeComplex(int cores, int mhz, Nanos window)
      : mhz_(mhz), window_(window), free_at_(cores, 0) {}

  Nanos cycles_to_ns(std::int64_t cycles) const {
    return (cycles * 1000 + mhz_ - 1) / mhz_;
  }

  struct Reservation {
    Nanos start;
    Nanos end;
  };

  Reservation reserve(Nanos busy_ns, Nanos earliest);

  int cores() const { return static_cast<int>(free_at_.size()); }
  std::int64_t busy_total_ns() const { return busy_total_; }

  // Fraction of core time spent busy inside window `idx` ([idx*w, (idx+1)*w)).
  double window_utilization(std::int64_t idx) const;

 private:
  void account(Nanos start, Nanos end);

  int mhz_;
  Nanos window_;
  std::vector<Nanos> free_at_;
  std::vector<std::int64_t> bins_;
  std::int64_t busy_total_ = 0;
};

// A serial pipe with a fixed byte rate (device-level read/write ceilings,
// data-end agent service, and similar).
class RatePipe {
 public:
  explicit RatePipe(std::int64_t bytes_per_s) : rate_(bytes_per_s) {}

  Nanos reserve(std::int64_t bytes, Nanos earliest) {
    const Nanos start = std::max(earliest, free_at_);
    free_at_ = start + transfer_ns(bytes, rate_);
    return free_at_;
  }
  Nanos free_at() const { return free_at_; }

 private:
  std::int64_t rate_;
  Nanos free_at_ = 0;
};

enum class QueueRole : std::uint8_t { Normal, Shadow };

struct QueuePair {
  std::uint16_t sqid = 0;  // globally unique
  std::uint32_t ssd = 0;   // device owning this QP
  QueueRole role = QueueRole::Normal;
  int weight = 1;
  int depth = 256;
  bool bound = false;            // shadow: currently serving a borrower
  std::uint32_t bound_borrower = 0;
  std::deque<std::uint64_t> sq;  // command ids

  bool sq_full() const { return static_cast<int>(sq.size()) >= depth; }
};

struct NvmeCommand {
  std::uint64_t id = 0;
  std::uint32_t owner = 0;  // SSD whose data this command addresses
  bool is_write = false;
  std::int64_t offset = 0;
  std::int64_t size = 0;
  std::uint64_t write_token = 0;  // data-integrity tag carried by writes

  Nanos created = 0;     // workload arrival
  Nanos submit_time = 0; // host began processing
  std::uint16_t sqid = 0;
  bool redirected = false;   // rode a shadow SQ
  std::uint32_t exec_ssd = 0;
  int workload_slot = -1;    // closed-loop driver to refill, -1 = none
  std::uint32_t route_ssd = 0;  // device that physically serves it (VH)

  bool error = false;
  bool completed = false;
  int timeouts = 0;
  std::vector<std::uint64_t> vh_tokens;  // copyback: per-slice tokens to replay

  LatencyBreakdown buckets;
  Nanos accounted_until = 0;

  // Attribute [start, end) to a bucket along the critical path; overlapping
  // spans are only counted once so bucket sums never exceed end-to-end.
  void charge(Bucket b, Nanos start, Nanos end) {
    const Nanos s = std::max(start, accounted_until);
    if (end <= s) return;
    buckets[b] += end - s;
    accounted_until = end;
  }
};

}  // namespace xbofsim
