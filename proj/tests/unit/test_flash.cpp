#include <doctest.h>

#include <algorithm>
#include <vector>

#include "xbofsim/flash.hpp"
#include "xbofsim/rng.hpp"

using namespace xbofsim;

namespace {

FlashGeometry small_geometry() {
  FlashGeometry g;
  g.channels = 2;
  g.dies_per_channel = 2;
  g.planes_per_die = 4;
  g.blocks_per_plane = 8;
  g.pages_per_block = 12;
  return g;
}

}  // namespace

TEST_CASE("defaults give 4 TB and the Table-layout invariants hold") {
  FlashGeometry g;
  REQUIRE(g.capacity_bytes() == 4LL * 1024 * 1024 * 1024 * 1024);
  FlashTiming t;
  t.validate();
}

TEST_CASE("LSB read on an idle die: cell plus one page transfer") {
  FlashBackbone flash(small_geometry(), FlashTiming{});
  const auto r = flash.submit(FlashOpKind::Read, {0, 0, 0, 0, 0}, 0);
  REQUIRE(r.cell_end - r.cell_start == 30'000);
  // 16384 B at 2400 MT/s (8-bit) -> 6827 ns
  REQUIRE(r.complete == 30'000 + 6'827);
}

TEST_CASE("page types cycle LSB/CSB/MSB by page index") {
  FlashBackbone flash(small_geometry(), FlashTiming{});
  const auto csb = flash.submit(FlashOpKind::Read, {0, 0, 0, 0, 1}, 0);
  REQUIRE(csb.cell_end - csb.cell_start == 45'000);
  const auto msb = flash.submit(FlashOpKind::Read, {1, 0, 0, 0, 2}, 0);
  REQUIRE(msb.cell_end - msb.cell_start == 60'000);
}

TEST_CASE("erase occupies the die for 3 ms") {
  FlashBackbone flash(small_geometry(), FlashTiming{});
  const auto r = flash.submit(FlashOpKind::Erase, {0, 0, 0, 0, 0}, 0);
  REQUIRE(r.complete - r.start == 3'000'000);
}

TEST_CASE("two reads to one die serialize on the cell") {
  FlashBackbone flash(small_geometry(), FlashTiming{});
  const auto a = flash.submit(FlashOpKind::Read, {0, 0, 0, 0, 0}, 0);
  const auto b = flash.submit(FlashOpKind::Read, {0, 0, 1, 0, 3}, 0);
  REQUIRE(b.cell_start >= a.cell_end);
  REQUIRE(b.complete >= a.cell_end + 30'000);
}

TEST_CASE("same page offset on distinct planes shares one cell window") {
  FlashBackbone flash(small_geometry(), FlashTiming{});
  const auto a = flash.submit(FlashOpKind::Read, {0, 0, 0, 0, 0}, 0);
  const auto b = flash.submit(FlashOpKind::Read, {0, 0, 1, 0, 0}, 0);
  REQUIRE(b.cell_start == a.cell_start);
  REQUIRE(b.cell_end == a.cell_end);
  // ...but transfers still serialize on the channel.
  REQUIRE(b.complete == a.complete + 6'827);
  // A different page offset cannot join.
  const auto c = flash.submit(FlashOpKind::Read, {0, 0, 2, 0, 3}, 0);
  REQUIRE(c.cell_start >= a.cell_end);
}

TEST_CASE("program to a non-erased page faults") {
  FlashBackbone flash(small_geometry(), FlashTiming{});
  flash.submit(FlashOpKind::Program, {0, 0, 0, 0, 0}, 0);
  REQUIRE_THROWS_AS(flash.submit(FlashOpKind::Program, {0, 0, 0, 0, 0}, 0),
                    FlashFault);
  flash.submit(FlashOpKind::Erase, {0, 0, 0, 0, 0}, 0);
  REQUIRE_NOTHROW(flash.submit(FlashOpKind::Program, {0, 0, 0, 0, 0}, 0));
}

TEST_CASE("out-of-range addresses fault") {
  FlashBackbone flash(small_geometry(), FlashTiming{});
  REQUIRE_THROWS_AS(flash.submit(FlashOpKind::Read, {5, 0, 0, 0, 0}, 0), FlashFault);
  REQUIRE_THROWS_AS(flash.submit(FlashOpKind::Read, {0, 0, 0, 0, 99}, 0), FlashFault);
}

TEST_CASE("utilization window: empty, single saturated die, faults") {
  FlashBackbone flash(small_geometry(), FlashTiming{});
  REQUIRE(flash.utilization_window(0, 1'000'000) == 0.0);
  // Saturate one die of four with back-to-back erases.
  Nanos t = 0;
  while (t < 12'000'000) {
    const auto r = flash.submit(FlashOpKind::Erase, {0, 0, 0, 0, 0}, t);
    flash.submit(FlashOpKind::Erase, {0, 0, 1, 0, 0}, t);  // same die, serialized
    t = r.complete;
  }
  const double util = flash.utilization_window(0, 12'000'000);
  REQUIRE(util == doctest::Approx(1.0 / 4.0).epsilon(0.01));
  REQUIRE_THROWS(flash.utilization_window(5, 5));
}

TEST_CASE("per-die cell intervals never overlap") {
  FlashBackbone flash(small_geometry(), FlashTiming{});
  RngStream rng(99);
  struct Interval {
    int die;
    Nanos s, e;
  };
  std::vector<Interval> intervals;
  for (int i = 0; i < 300; ++i) {
    FlashAddress a;
    a.channel = static_cast<int>(rng.below(2));
    a.die = static_cast<int>(rng.below(2));
    a.plane = static_cast<int>(rng.below(4));
    a.block = static_cast<int>(rng.below(8));
    a.page = static_cast<int>(rng.below(12));
    const auto kind = rng.below(4) == 0 ? FlashOpKind::Erase : FlashOpKind::Read;
    const Nanos when = static_cast<Nanos>(rng.below(2'000'000));
    const auto r = flash.submit(kind, a, when);
    intervals.push_back({a.channel * 2 + a.die, r.cell_start, r.cell_end});
  }
  std::sort(intervals.begin(), intervals.end(), [](const auto& x, const auto& y) {
    return std::tie(x.die, x.s) < std::tie(y.die, y.s);
  });
  for (std::size_t i = 1; i < intervals.size(); ++i) {
    if (intervals[i].die != intervals[i - 1].die) continue;
    if (intervals[i].s == intervals[i - 1].s &&
        intervals[i].e == intervals[i - 1].e)
      continue;  // shared multi-plane window
    REQUIRE(intervals[i].s >= intervals[i - 1].e);
  }
}

TEST_CASE("channel transfer conservation") {
  FlashBackbone flash(small_geometry(), FlashTiming{});
  Nanos last_complete = 0;
  const int ops = 64;
  for (int i = 0; i < ops; ++i) {
    // Spread over dies so the channel is the shared resource.
    FlashAddress a{0, i % 2, (i / 2) % 4, i % 8, (3 * i) % 12};
    const auto r = flash.submit(FlashOpKind::Read, a, 0);
    last_complete = std::max(last_complete, r.complete);
  }
  // All transfers went to channel 0 at 6827 ns each; elapsed must cover them.
  REQUIRE(last_complete >= static_cast<Nanos>(ops) * 6'827);
}
