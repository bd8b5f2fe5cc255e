#include "xbofsim/engine.hpp"

#include <stdexcept>

namespace xbofsim {

EventHandle Engine::schedule(Nanos delay, ActorId target, const char* kind,
                             std::function<void()> fn) {
  if (delay < 0) throw std::invalid_argument("Engine::schedule: negative delay");
  const std::uint64_t seq = next_sequence_++;
  Ev ev;
  ev.fire_time = now_ + delay;
  ev.sequence = seq;
  ev.target = target;
  ev.kind = kind;
  ev.fn = std::move(fn);
  queue_.push(std::move(ev));
  ++stats_.scheduled;
  return seq;
}

bool Engine::cancel(EventHandle h) {
  if (h >= next_sequence_) return false;
  const bool inserted = cancelled_.insert(h).second;
  if (inserted) ++stats_.cancelled;
  return inserted;
}

DispatchStats Engine::run_until(Nanos end, std::uint64_t max_events) {
  DispatchStats delta;
  std::uint64_t dispatched = 0;
  while (!queue_.empty() && queue_.top().fire_time <= end) {
    if (dispatched >= max_events) return delta;  // clock stays on last event
    Ev ev = queue_.top();
    queue_.pop();
    if (auto it = cancelled_.find(ev.sequence); it != cancelled_.end()) {
      cancelled_.erase(it);
      continue;
    }
    now_ = ev.fire_time;
    if (trace_) trace_(ev.fire_time, ev.target, ev.kind);
    ++stats_.dispatched;
    ++delta.dispatched;
    ++dispatched;
    ev.fn();
  }
  now_ = end;
  return delta;
}

}  // namespace xbofsim
