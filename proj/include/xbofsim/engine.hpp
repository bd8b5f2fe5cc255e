#pragma once

#include <cstdint>
#include <functional>
#include <queue>
#include <unordered_set>
#include <vector>

#include "xbofsim/rng.hpp"
#include "xbofsim/time.hpp"

namespace xbofsim {

// Actor identifiers for the dispatch trace. Host is 0, SSDs are 1..N,
// kFabricActor serves fabric-internal events.
using ActorId = std::uint32_t;
constexpr ActorId kHostActor = 0;
constexpr ActorId kFabricActor = 0xFFFF;

constexpr ActorId ssd_actor(std::uint32_t ssd_id) { return ssd_id + 1; }

using EventHandle = std::uint64_t;

struct DispatchStats {
  std::uint64_t scheduled = 0;
  std::uint64_t dispatched = 0;
  std::uint64_t cancelled = 0;
  std::uint64_t pending() const { return scheduled - dispatched - cancelled; }
};

// Deterministic single-threaded event kernel. Events fire in nondecreasing
// time; ties dispatch in scheduling order (global sequence counter).
class Engine {
 public:
  explicit Engine(std::uint64_t seed) : rng_(seed) {}

  Nanos now() const { return now_; }

  EventHandle schedule(Nanos delay, ActorId target, const char* kind,
                       std::function<void()> fn);

  // True if the event was still pending.
  bool cancel(EventHandle h);

  // Dispatches every event with fire_time <= end (or until max_events).
  // The clock lands on `end` unless the event cap stopped us early.
  DispatchStats run_until(Nanos end,
                          std::uint64_t max_events = ~std::uint64_t{0});

  RngStream& rng(std::string_view stream) { return rng_.stream(stream); }

  const DispatchStats& stats() const { return stats_; }

  // One line per dispatch: "<time> <target> <kind>". Used by the event-trace
  // dump and the determinism test.
  void set_trace(std::function<void(Nanos, ActorId, const char*)> sink) {
    trace_ = std::move(sink);
  }

 private:
  struct Ev {
    Nanos fire_time;
    std::uint64_t sequence;
    ActorId target;
    const char* kind;
    std::function<void()> fn;
  };
  struct Later {
    bool operator()(const Ev& a, const Ev& b) const {
      if (a.fire_time != b.fire_time) return a.fire_time > b.fire_time;
      return a.sequence > b.sequence;
    }
  };

  Nanos now_ = 0;
  std::uint64_t next_sequence_ = 0;
  std::priority_queue<Ev, std::vector<Ev>, Later> queue_;
  std::unordered_set<std::uint64_t> cancelled_;
  DispatchStats stats_;
  RngPool rng_;
  std::function<void(Nanos, ActorId, const char*)> trace_;
};

}  // namespace xbofsim
