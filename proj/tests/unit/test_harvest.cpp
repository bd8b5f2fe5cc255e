#include <doctest.h>

#include "xbofsim/harvest.hpp"
#include "xbofsim/rng.hpp"

using namespace xbofsim;

TEST_CASE("processor trigger: both busy, lendable, borrowable") {
  REQUIRE(decide_processor_action(0.80, 0.80) == ProcessorAction::None);
  REQUIRE(decide_processor_action(0.50, 0.95) == ProcessorAction::Lend);
  REQUIRE(decide_processor_action(0.95, 0.42) == ProcessorAction::Borrow);
  // A fully idle SSD also lends.
  REQUIRE(decide_processor_action(0.05, 0.02) == ProcessorAction::Lend);
}

TEST_CASE("redirect ratio: worked example, symmetry, direct evaluation") {
  // Equal utilizations, lender carries one extra shadow SQ of weight 1.
  const auto worked = compute_redirect_ratio(5000, 5000, 2, 2, 1, 3);
  REQUIRE(worked.ratio == doctest::Approx(3.0));
  REQUIRE(worked.probability == doctest::Approx(0.25));

  // Fully symmetric setup: single equal-weight queues, equal utilization.
  const auto sym = compute_redirect_ratio(4000, 4000, 1, 1, 1, 1);
  REQUIRE(sym.ratio == doctest::Approx(1.0));
  REQUIRE(sym.probability == doctest::Approx(0.5));

  const auto direct = compute_redirect_ratio(6000, 2000, 2, 4, 1, 4);
  REQUIRE(direct.ratio == doctest::Approx(2.0 / 3.0));
  REQUIRE(direct.probability == doctest::Approx(0.6));
}

TEST_CASE("redirect ratio: division guard and bad weights") {
  const auto guarded = compute_redirect_ratio(0, 2000, 1, 1, 1, 1);
  REQUIRE(guarded.ratio == doctest::Approx(2000.0));
  REQUIRE_THROWS(compute_redirect_ratio(1, 1, 0, 1, 1, 1));
}

TEST_CASE("redirect probability is monotone in each argument") {
  RngStream rng(3);
  for (int i = 0; i < 200; ++i) {
    const auto u_b = static_cast<std::uint32_t>(1 + rng.below(9999));
    const auto u_l = static_cast<std::uint32_t>(1 + rng.below(9999));
    const double wb = 1 + rng.below(4), swb = wb + rng.below(4);
    const double ws = 1 + rng.below(4), swl = ws + rng.below(4);
    const auto base = compute_redirect_ratio(u_b, u_l, wb, swb, ws, swl);
    // Busier lender -> lower redirect probability.
    REQUIRE(compute_redirect_ratio(u_b, u_l + 100, wb, swb, ws, swl).probability <
            base.probability);
    // Busier borrower -> higher redirect probability.
    REQUIRE(compute_redirect_ratio(u_b + 100, u_l, wb, swb, ws, swl).probability >
            base.probability);
    // Heavier shadow SQ weight -> more commands redirected.
    REQUIRE(compute_redirect_ratio(u_b, u_l, wb, swb, ws + 1, swl).probability >
            base.probability);
  }
}

TEST_CASE("empirical redirect fraction matches the analytic probability") {
  // ratio 3 -> p = 0.25; 1e5 seeded draws land within +-1 pp.
  const auto r = compute_redirect_ratio(5000, 5000, 2, 2, 1, 3);
  RngStream rng(20260808);
  int redirected = 0;
  const int n = 100'000;
  for (int i = 0; i < n; ++i)
    if (rng.uniform() < r.probability) ++redirected;
  const double fraction = static_cast<double>(redirected) / n;
  REQUIRE(fraction == doctest::Approx(0.25).epsilon(0.04));
  REQUIRE(std::abs(fraction - 0.25) < 0.01);
}

namespace {

MrcEstimate step_mrc(std::vector<double> values) {
  MrcEstimate mrc;
  mrc.miss_ratio = std::move(values);
  mrc.samples = 100'000;
  return mrc;
}

}  // namespace

TEST_CASE("dram decision: borrow to the threshold, capped") {
  // Working set fits in 10 segments; current 8 with MRC(10) = 0.
  std::vector<double> curve(12, 1.0);
  curve[8] = 0.4;
  curve[9] = 0.2;
  curve[10] = 0.0;
  curve[11] = 0.0;
  const auto mrc = step_mrc(curve);
  const auto d = decide_dram_action(mrc, 8, 12);
  REQUIRE(d.kind == DramDecision::Kind::Borrow);
  REQUIRE(d.segments == 2);

  DramPolicy capped;
  capped.borrow_cap_segments = 1;
  const auto d2 = decide_dram_action(mrc, 8, 12, capped);
  REQUIRE(d2.segments == 1);
}

TEST_CASE("dram decision: flat curve lends nearly everything") {
  // Uniform random over a huge footprint: extra segments never help.
  std::vector<double> curve(17, 0.95);
  curve[0] = 1.0;
  auto mrc = step_mrc(curve);
  const auto d = decide_dram_action(mrc, 16, 16);
  REQUIRE(d.kind == DramDecision::Kind::Lend);
  REQUIRE(d.segments == 15);  // keeps one resident segment
}

TEST_CASE("dram decision: below threshold and steep curve does nothing") {
  std::vector<double> curve{1.0, 0.5, 0.2, 0.05, 0.04, 0.04};
  const auto d = decide_dram_action(step_mrc(curve), 3, 5);
  REQUIRE(d.kind == DramDecision::Kind::None);
}

TEST_CASE("dram decision: cold estimate does nothing") {
  MrcEstimate cold;
  cold.samples = 3;
  cold.miss_ratio.assign(8, 1.0);
  REQUIRE(decide_dram_action(cold, 2, 8).kind == DramDecision::Kind::None);
}

TEST_CASE("descriptor table: publish, claim, withdraw interleavings") {
  Engine eng(1);
  CxlFabric fabric(eng, FabricConfig{}, 4);
  DescriptorTable table(fabric, 0);

  IdleResourceDescriptor d;
  d.valid = true;
  d.type = ResourceType::Processor;
  d.set_processor_info(0, 0, 42);
  const auto slot = table.publish(d);
  REQUIRE(slot.has_value());

  // Claim succeeds once; the loser sees a borrower id.
  const auto snap = DescriptorTable::read_all(fabric, 1, table.base());
  REQUIRE(DescriptorTable::claim(fabric, 1, table.base(), *slot, snap[*slot], 1));
  REQUIRE_FALSE(DescriptorTable::claim(fabric, 2, table.base(), *slot, snap[*slot], 2));
  REQUIRE(table.read_local(*slot).borrower_id == 1);

  // Release restores the unclaimed sentinel.
  DescriptorTable::release(fabric, 1, table.base(), *slot);
  REQUIRE(table.read_local(*slot).unclaimed());

  // Withdraw mid-search: a snapshot taken before invalidation cannot claim.
  const auto stale = DescriptorTable::read_all(fabric, 1, table.base());
  table.invalidate(*slot);
  REQUIRE_FALSE(DescriptorTable::claim(fabric, 1, table.base(), *slot, stale[*slot], 1));
}

TEST_CASE("descriptor table: full table defers publication") {
  Engine eng(1);
  CxlFabric fabric(eng, FabricConfig{}, 2);
  DescriptorTable table(fabric, 0);
  IdleResourceDescriptor d;
  d.valid = true;
  for (int i = 0; i < DescriptorTable::kSlots; ++i) REQUIRE(table.publish(d));
  REQUIRE_FALSE(table.publish(d).has_value());
  table.invalidate(3);
  REQUIRE(table.publish(d) == 3);  // oldest invalid slot reused
}
