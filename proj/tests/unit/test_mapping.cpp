#include <doctest.h>

#include "xbofsim/mapping.hpp"

using namespace xbofsim;

TEST_CASE("ppn packing round trips") {
  const auto e = pack_ppn(123456, 3);
  REQUIRE(ppn_page(e) == 123456);
  REQUIRE(ppn_slot(e) == 3);
}

TEST_CASE("full-table cache hits everything after prewarm") {
  MappingCache cache(8 * 128, 128, 8);  // capacity == table
  cache.prewarm();
  for (int pass = 0; pass < 2; ++pass)
    for (std::int64_t p = 0; p < 8 * 128; ++p) cache.access(p, false);
  REQUIRE(cache.misses() == 0);
  REQUIRE(cache.hits() == 2 * 8 * 128);
}

TEST_CASE("page-stride cyclic scan over twice the capacity misses every access") {
  // One-segment cache, two segments' worth of mapping pages.
  MappingCache cache(2 * 128, 128, 1);
  std::uint64_t accesses = 0;
  for (int pass = 0; pass < 4; ++pass) {
    for (std::int64_t p = 0; p < 2 * 128; ++p) {
      cache.access(p, false);
      ++accesses;
    }
  }
  const double miss_ratio =
      static_cast<double>(cache.misses()) / static_cast<double>(accesses);
  REQUIRE(miss_ratio == doctest::Approx(1.0));
}

TEST_CASE("eviction reclaims the LRU segment and flushes its dirty pages") {
  MappingCache cache(4 * 4, 4, 2);  // 4 regions of 4 pages, 2 local frames
  cache.access(4, true);  // region 1, dirtied, then left cold
  for (int p : {0, 1, 2, 3}) cache.access(p, false);  // region 0 hot
  for (int p : {8, 9, 10}) cache.access(p, false);    // region 2 hot
  // Ninth present page exceeds two segments' worth; region 1 is LRU.
  const auto out = cache.access(11, false);
  bool flushed_region1 = false;
  for (const auto& a : out.actions) {
    if (a.region == 1 && a.kind == MappingCache::Action::Kind::FlushSegment) {
      flushed_region1 = true;
      REQUIRE(a.pages == std::vector<int>{0});  // the dirtied page
    }
  }
  REQUIRE(flushed_region1);
  REQUIRE(cache.location(1) == SegmentLocation::NotCached);
  REQUIRE(cache.location(0) == SegmentLocation::Local);
  REQUIRE(cache.location(2) == SegmentLocation::Local);
}

TEST_CASE("offsite frames hold demoted segments; removal drops them") {
  MappingCache cache(4 * 4, 4, 1);
  cache.add_offsite_frames(9, 1);
  // Fill region 0, then touch region 1 until region 0 demotes.
  for (int p = 0; p < 4; ++p) cache.access(p, false);
  const auto out = cache.access(4, false);
  bool demoted = false;
  for (const auto& a : out.actions)
    if (a.kind == MappingCache::Action::Kind::DemoteSegment && a.region == 0 &&
        a.lender == 9)
      demoted = true;
  REQUIRE(demoted);
  REQUIRE(cache.location(0) == SegmentLocation::Offsite);
  REQUIRE(cache.lender_of(0) == 9);
  // Offsite hits keep serving.
  const auto hit = cache.access(0, false);
  REQUIRE_FALSE(hit.page_fill);
  REQUIRE(hit.where == SegmentLocation::Offsite);
  // Lender disappears: region drops, capacity returns to local-only.
  const auto actions = cache.remove_offsite_frames(9);
  REQUIRE(actions.size() == 1);
  REQUIRE(cache.offsite_capacity() == 0);
  REQUIRE(cache.location(0) == SegmentLocation::NotCached);
}

TEST_CASE("shrink_local evicts down to the new capacity") {
  MappingCache cache(8 * 2, 2, 4);
  for (std::int64_t p = 0; p < 8; ++p) cache.access(p, false);  // 4 regions
  const auto actions = cache.shrink_local(2);
  REQUIRE(cache.local_capacity() == 2);
  REQUIRE(actions.size() == 2);
  int cached = 0;
  for (std::int64_t r = 0; r < cache.regions(); ++r)
    if (cache.location(r) == SegmentLocation::Local) ++cached;
  REQUIRE(cached == 2);
}
