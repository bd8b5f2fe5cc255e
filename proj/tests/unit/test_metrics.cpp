#include <doctest.h>

#include "xbofsim/metrics.hpp"

using namespace xbofsim;

TEST_CASE("bom cost reproduces the 2 TB price points") {
  REQUIRE(bom_cost(2.0, Variant::Conv) == doctest::Approx(147.60));
  REQUIRE(bom_cost(2.0, Variant::Xbof) == doctest::Approx(119.52));
  const double saving = 1.0 - bom_cost(2.0, Variant::Xbof) / bom_cost(2.0, Variant::Conv);
  REQUIRE(saving * 100.0 == doctest::Approx(19.0).epsilon(0.006));
  // Shrunk halves the compute-side costs without the CXL uplift.
  REQUIRE(bom_cost(2.0, Variant::Shrunk) == doctest::Approx(79.2 + 7.2 + 24 + 6));
  REQUIRE(bom_cost(2.0, Variant::Vh) == bom_cost(2.0, Variant::Shrunk));
  REQUIRE(bom_cost(2.0, Variant::Oc) == doctest::Approx(79.2 + 12 + 6));
}

TEST_CASE("bom cost is linear in capacity up to the constants") {
  const double c2 = bom_cost(2.0, Variant::Conv);
  const double c4 = bom_cost(4.0, Variant::Conv);
  // Doubling capacity doubles flash+dram but not controller/other.
  REQUIRE(c4 - c2 == doctest::Approx(2.0 * (1024.0 / 128.0 * 4.95) + 2.0 * 7.2));
  REQUIRE_THROWS(bom_cost(0.0, Variant::Conv));
  REQUIRE_THROWS(bom_cost(-1.0, Variant::Xbof));
}

TEST_CASE("one LSB read of 30 us costs 2.475 uJ of cell energy") {
  DeviceEnergyInputs in;
  in.duration = 30'000;
  in.dies = 1;
  in.active = true;
  in.flash_busy_ns = 30'000;
  const auto report = energy_account({in});
  REQUIRE(report.flash_active_j == doctest::Approx(3.3 * 0.025 * 30e-6));
  REQUIRE(report.flash_idle_j == 0.0);
}

TEST_CASE("a zero-I/O run is all idle and standby energy") {
  DeviceEnergyInputs idle;
  idle.duration = kSecond;
  idle.dies = 64;
  idle.active = false;  // standby current applies
  const auto report = energy_account({idle});
  REQUIRE(report.flash_active_j == 0.0);
  REQUIRE(report.processor_j == 0.0);
  REQUIRE(report.phy_j == 0.0);
  REQUIRE(report.flash_idle_j == doctest::Approx(3.3 * 10e-6 * 64.0));
  REQUIRE(report.total() == report.flash_idle_j);
}

TEST_CASE("per-component energy sums to the total") {
  DeviceEnergyInputs in;
  in.duration = kSecond;
  in.dies = 8;
  in.active = true;
  in.flash_busy_ns = 100 * kMilli;
  in.core_busy_ns = 3 * 200 * kMilli;
  in.dram_bytes = 1 << 30;
  in.link_bytes = 1 << 30;
  const auto report = energy_account({in});
  REQUIRE(report.total() == doctest::Approx(report.flash_active_j + report.flash_idle_j +
                                            report.phy_j + report.processor_j +
                                            report.dram_j));
  // 6.45 W over 6 reference cores, 0.6 core-seconds busy.
  REQUIRE(report.processor_j == doctest::Approx(6.45 / 6.0 * 0.6));
  REQUIRE(report.dram_j == doctest::Approx(22e-12 * 8.0 * (1 << 30)));
}

TEST_CASE("device metrics: buckets + queue wait equal end-to-end") {
  DeviceMetrics m;
  m.set_window(10 * kMilli);
  LatencyBreakdown b;
  b[Bucket::Host] = 1000;
  b[Bucket::Flash] = 45'000;
  m.record_completion(false, 4096, 1000, 60'000, b);
  const auto s = m.summarize(0, kMilli, 1 << 30);
  REQUIRE(s.reads == 1);
  REQUIRE(s.mean_latency == 59'000);
  REQUIRE(s.mean_queue_wait == 59'000 - 46'000);
  REQUIRE(s.mean_buckets.sum() + s.mean_queue_wait == s.mean_latency);
}

TEST_CASE("throughput series integrates to total bytes") {
  DeviceMetrics m;
  m.set_window(kMilli);
  LatencyBreakdown b;
  std::int64_t total = 0;
  for (int i = 0; i < 50; ++i) {
    const std::int64_t bytes = 4096 * (1 + i % 3);
    m.record_completion(i % 2 == 0, bytes, i * 100'000, i * 100'000 + 50'000, b);
    total += bytes;
  }
  std::int64_t series_sum = 0;
  for (const auto v : m.throughput_series()) series_sum += v;
  REQUIRE(series_sum == total);
  REQUIRE(m.total_bytes() == total);
}

TEST_CASE("write amplification is physical over user-programmed bytes") {
  DeviceMetrics m;
  LatencyBreakdown b;
  m.record_completion(true, 1 << 20, 0, 100, b);
  m.add_user_programmed(1 << 20);
  m.add_physical_write(1 << 20);
  m.add_physical_write(1 << 19);  // GC contribution
  const auto s = m.summarize(0, kMilli, 1 << 30);
  REQUIRE(s.write_amplification == doctest::Approx(1.5));
}

TEST_CASE("variant names round trip") {
  for (const auto v : {Variant::Conv, Variant::Shrunk, Variant::Oc, Variant::Vh,
                       Variant::VhIdeal, Variant::ProcH, Variant::Xbof})
    REQUIRE(variant_from_string(to_string(v)) == v);
  REQUIRE_THROWS(variant_from_string("bogus"));
}
