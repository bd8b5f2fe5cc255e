#include <doctest.h>

#include <sstream>

#include "xbofsim/workload.hpp"

using namespace xbofsim;

TEST_CASE("empty trace file gives an empty stream and no warnings") {
  std::istringstream in("");
  const auto r = load_trace(in);
  REQUIRE(r.records.empty());
  REQUIRE(r.warnings.empty());
}

TEST_CASE("bad header reports the line number") {
  std::istringstream in("time,dev,op\n1,0,R,0,4096\n");
  REQUIRE_THROWS_WITH_AS(load_trace(in),
                         doctest::Contains("line 1"), std::runtime_error);
}

TEST_CASE("malformed lines are counted and skipped") {
  std::istringstream in(
      "timestamp_us,device_id,op,offset,size\n"
      "10,0,R,0,4096\n"
      "11,0,X,0,4096\n"
      "oops\n"
      "12,0,W,4096,-1\n"
      "13,1,W,8192,8192\n");
  const auto r = load_trace(in);
  REQUIRE(r.records.size() == 2);
  REQUIRE(r.malformed_lines == 3);
}

TEST_CASE("out-of-order timestamps are stable-sorted with a warning") {
  std::istringstream in(
      "timestamp_us,device_id,op,offset,size\n"
      "20,0,R,0,4096\n"
      "10,0,W,4096,4096\n"
      "10,0,R,8192,4096\n");
  const auto r = load_trace(in);
  REQUIRE(r.reordered == 2);
  REQUIRE_FALSE(r.warnings.empty());
  REQUIRE(r.records[0].timestamp_us == 10);
  REQUIRE(r.records[0].is_write);  // stable order among equal stamps
  REQUIRE_FALSE(r.records[1].is_write);
}

TEST_CASE("save/load round trip is identity") {
  SyntheticProfile p;
  p.read_ratio = 0.7;
  p.footprint_bytes = 1 << 26;
  p.rate_iops = 50'000;
  const auto records = generate(p, 20 * kMilli, 99, 3);
  REQUIRE(records.size() > 500);
  std::ostringstream out;
  save_trace(out, records);
  std::istringstream in(out.str());
  const auto back = load_trace(in);
  REQUIRE(back.records == records);
  REQUIRE(back.malformed_lines == 0);
}

TEST_CASE("generated stream matches the profile statistics") {
  // Stats shaped like a write-dominated production volume: 2% reads,
  // 289.5 KB mean writes.
  SyntheticProfile p;
  p.read_ratio = 0.02;
  p.mean_read_kb = 12.5;
  p.mean_write_kb = 289.5;
  p.footprint_bytes = 8LL << 30;
  SyntheticSampler sampler(p, 1);
  const int n = 100'000;
  std::int64_t writes = 0, write_bytes = 0, reads = 0, read_bytes = 0;
  for (int i = 0; i < n; ++i) {
    const auto r = sampler.next();
    REQUIRE(r.size % 4096 == 0);
    REQUIRE(r.size >= 4096);
    if (r.is_write) {
      ++writes;
      write_bytes += r.size;
    } else {
      ++reads;
      read_bytes += r.size;
    }
  }
  const double read_fraction = static_cast<double>(reads) / n;
  REQUIRE(read_fraction > 0.015);
  REQUIRE(read_fraction < 0.025);
  const double mean_write_kb =
      static_cast<double>(write_bytes) / writes / 1024.0;
  REQUIRE(mean_write_kb == doctest::Approx(289.5).epsilon(0.05));
  const double mean_read_kb = static_cast<double>(read_bytes) / reads / 1024.0;
  REQUIRE(mean_read_kb == doctest::Approx(12.5).epsilon(0.05));
}

TEST_CASE("read_ratio 1.0 yields zero writes") {
  SyntheticProfile p;
  p.read_ratio = 1.0;
  SyntheticSampler sampler(p, 5);
  for (int i = 0; i < 10'000; ++i) REQUIRE_FALSE(sampler.next().is_write);
}

TEST_CASE("identical seeds produce identical streams") {
  SyntheticProfile p;
  p.pattern = AccessPattern::Zipf;
  const auto a = generate(p, 5 * kMilli, 7, 0);
  const auto b = generate(p, 5 * kMilli, 7, 0);
  REQUIRE(a == b);
  const auto c = generate(p, 5 * kMilli, 8, 0);
  REQUIRE(a != c);
}

TEST_CASE("sequential sampler wraps inside the footprint") {
  SyntheticProfile p;
  p.pattern = AccessPattern::Sequential;
  p.footprint_bytes = 1 << 20;
  p.mean_read_kb = 64;
  p.read_ratio = 1.0;
  SyntheticSampler sampler(p, 2);
  for (int i = 0; i < 1000; ++i) {
    const auto r = sampler.next();
    REQUIRE(r.offset >= 0);
    REQUIRE(r.offset + r.size <= p.footprint_bytes);
  }
}

TEST_CASE("microbench spec validation") {
  MicrobenchSpec ok{true, false, 65536, 64, 0, 0};
  ok.validate();
  MicrobenchSpec bad_size{true, false, 1000, 1, 0, 0};
  REQUIRE_THROWS(bad_size.validate());
  MicrobenchSpec bad_depth{true, false, 4096, 0, 0, 0};
  REQUIRE_THROWS(bad_depth.validate());
}
