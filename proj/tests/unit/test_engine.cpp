#include <doctest.h>

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "xbofsim/engine.hpp"

using namespace xbofsim;

TEST_CASE("zero-delay event fires before any later event") {
  Engine eng(1);
  std::vector<int> order;
  eng.schedule(5, kHostActor, "late", [&] { order.push_back(2); });
  eng.schedule(0, kHostActor, "now", [&] { order.push_back(1); });
  eng.run_until(10);
  REQUIRE(order == std::vector<int>{1, 2});
}

TEST_CASE("equal fire times dispatch in scheduling order") {
  Engine eng(1);
  std::vector<char> order;
  eng.schedule(100, kHostActor, "a", [&] { order.push_back('A'); });
  eng.schedule(100, kHostActor, "b", [&] { order.push_back('B'); });
  eng.run_until(100);
  REQUIRE(order == std::vector<char>{'A', 'B'});
}

TEST_CASE("delay is relative to the current clock") {
  Engine eng(1);
  Nanos fired_at = -1;
  eng.schedule(5'000, kHostActor, "outer", [&] {
    eng.schedule(30'000, ssd_actor(0), "inner", [&] { fired_at = eng.now(); });
  });
  eng.run_until(1'000'000);
  REQUIRE(fired_at == 35'000);
}

TEST_CASE("negative delay is rejected") {
  Engine eng(1);
  REQUIRE_THROWS_AS(eng.schedule(-1, kHostActor, "bad", [] {}), std::invalid_argument);
}

TEST_CASE("run_until on empty queue advances the clock with zero dispatches") {
  Engine eng(1);
  auto stats = eng.run_until(1'000'000'000);
  REQUIRE(stats.dispatched == 0);
  REQUIRE(eng.now() == 1'000'000'000);
}

TEST_CASE("run_until dispatches pending events and lands on the cap") {
  Engine eng(1);
  int fired = 0;
  eng.schedule(10, kHostActor, "x", [&] { ++fired; });
  auto stats = eng.run_until(1'000'000'000);
  REQUIRE(stats.dispatched == 1);
  REQUIRE(fired == 1);
  REQUIRE(eng.now() == 1'000'000'000);
}

TEST_CASE("event-count cap leaves the clock on the last dispatched event") {
  Engine eng(1);
  eng.schedule(10, kHostActor, "x", [] {});
  eng.schedule(20, kHostActor, "y", [] {});
  eng.run_until(100, 1);
  REQUIRE(eng.now() == 10);
}

TEST_CASE("cancelled events never fire and the ledger balances") {
  Engine eng(1);
  int fired = 0;
  auto h = eng.schedule(10, kHostActor, "x", [&] { ++fired; });
  eng.schedule(20, kHostActor, "y", [&] { ++fired; });
  REQUIRE(eng.cancel(h));
  REQUIRE_FALSE(eng.cancel(h));  // second cancel is a no-op
  eng.run_until(100);
  REQUIRE(fired == 1);
  const auto& s = eng.stats();
  REQUIRE(s.scheduled == s.dispatched + s.cancelled + s.pending());
  REQUIRE(s.pending() == 0);
}

namespace {

// A little self-scheduling workload used by the determinism check.
std::string traced_run(std::uint64_t seed) {
  Engine eng(seed);
  std::ostringstream log;
  eng.set_trace([&](Nanos t, ActorId a, const char* kind) {
    log << t << ' ' << a << ' ' << kind << '\n';
  });
  std::function<void(int)> step = [&](int depth) {
    if (depth > 50) return;
    const Nanos jitter = static_cast<Nanos>(eng.rng("jitter").below(500));
    eng.schedule(jitter, ssd_actor(depth % 4), "step",
                 [&step, depth] { step(depth + 1); });
    if (eng.rng("fork").uniform() < 0.3) {
      eng.schedule(jitter / 2, kHostActor, "fork",
                   [&step, depth] { step(depth + 10); });
    }
  };
  step(0);
  eng.run_until(100'000);
  return log.str();
}

}  // namespace

TEST_CASE("identical seed and setup give a byte-identical dispatch log") {
  const std::string a = traced_run(42);
  const std::string b = traced_run(42);
  REQUIRE(!a.empty());
  REQUIRE(a == b);
  REQUIRE(a != traced_run(43));
}

TEST_CASE("same stream and seed replay the same sequence") {
  Engine e1(7), e2(7);
  for (int i = 0; i < 100; ++i)
    REQUIRE(e1.rng("workload").next_u64() == e2.rng("workload").next_u64());
}

TEST_CASE("distinct streams are decorrelated") {
  Engine eng(7);
  auto& a = eng.rng("redirect");
  auto& b = eng.rng("workload");
  const int n = 100'000;
  double sum_a = 0, sum_b = 0, sum_ab = 0, sum_a2 = 0, sum_b2 = 0;
  for (int i = 0; i < n; ++i) {
    const double x = a.uniform();
    const double y = b.uniform();
    sum_a += x;
    sum_b += y;
    sum_ab += x * y;
    sum_a2 += x * x;
    sum_b2 += y * y;
  }
  const double cov = sum_ab / n - (sum_a / n) * (sum_b / n);
  const double var_a = sum_a2 / n - (sum_a / n) * (sum_a / n);
  const double var_b = sum_b2 / n - (sum_b / n) * (sum_b / n);
  const double corr = cov / std::sqrt(var_a * var_b);
  REQUIRE(std::abs(corr) < 0.05);
}

TEST_CASE("uniform draws average to one half") {
  Engine eng(7);
  auto& s = eng.rng("mean");
  double sum = 0;
  for (int i = 0; i < 1'000'000; ++i) sum += s.uniform();
  const double mean = sum / 1e6;
  REQUIRE(mean >= 0.499);
  REQUIRE(mean <= 0.501);
}
