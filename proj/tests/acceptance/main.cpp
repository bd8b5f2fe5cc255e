// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Heavier scenarios run at desk scale with fixed seeds.

#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <list>
#include <map>
#include <algorithm>
#include <string>
#include <vector>

#include "xbofsim/descriptor.hpp"
#include "xbofsim/harvest.hpp"
#include "xbofsim/metrics.hpp"
#include "xbofsim/mrc.hpp"
#include "xbofsim/rng.hpp"
#include "xbofsim/simulation.hpp"

using namespace xbofsim;

namespace {

int g_failures = 0;

void report(int criterion, const char* what, bool ok, const std::string& detail) {
  std::printf("%s criterion %2d: %s (%s)\n", ok ? "PASS" : "FAIL", criterion,
              what, detail.c_str());
  std::fflush(stdout);
  if (!ok) ++g_failures;
}

std::string fmt(const char* format, ...) {
  char buf[512];
  va_list args;
  va_start(args, format);
  std::vsnprintf(buf, sizeof buf, format, args);
  va_end(args);
  return buf;
}

// ---------------------------------------------------------------- 1: BOM
void criterion_bom_cost() {
  const double conv = bom_cost(2.0, Variant::Conv);
  const double xbof = bom_cost(2.0, Variant::Xbof);
  const double saving_pp = (1.0 - xbof / conv) * 100.0;
  const bool ok = std::abs(conv - 147.60) < 1e-9 && std::abs(xbof - 119.52) < 1e-9 &&
                  std::abs(saving_pp - 19.0) <= 0.1;
  report(1, "BOM cost exactness", ok,
         fmt("conv=$%.2f xbof=$%.2f saving=%.2f%%", conv, xbof, saving_pp));
}

// ------------------------------------------------------- 2: load balance
void criterion_load_balance() {
  const auto r = compute_redirect_ratio(5000, 5000, 2, 2, 1, 3);
  bool ok = std::abs(r.ratio - 3.0) < 1e-12 && std::abs(r.probability - 0.25) < 1e-12;
  RngStream rng(42);
  int redirected = 0;
  const int n = 100'000;
  for (int i = 0; i < n; ++i)
    if (rng.uniform() < r.probability) ++redirected;
  const double fraction = static_cast<double>(redirected) / n;
  ok = ok && std::abs(fraction - 0.25) <= 0.01;
  report(2, "load-balance formula", ok,
         fmt("ratio=%.3f p=%.4f empirical=%.4f over 1e5 draws", r.ratio,
             r.probability, fraction));
}

// ---------------------------------------------------- 3: descriptor codec
void criterion_descriptor_codec() {
  RngStream rng(7);
  bool ok = true;
  for (int i = 0; i < 10'000 && ok; ++i) {
    IdleResourceDescriptor d;
    d.valid = rng.below(2) == 1;
    d.type = static_cast<ResourceType>(rng.below(2));
    d.borrower_id = static_cast<std::uint8_t>(rng.below(256));
    d.amount = static_cast<std::uint32_t>(rng.next_u64());
    d.info = rng.next_u64();
    const auto bytes = d.encode();
    ok = IdleResourceDescriptor::decode(bytes) == d && bytes.size() == 16;
  }
  IdleResourceDescriptor fresh;
  ok = ok && fresh.unclaimed() && IdleResourceDescriptor::kUnclaimed == 0xFF;
  report(3, "descriptor codec identity", ok, "10000 fuzzed descriptors");
}

// ------------------------------------------------------------- 4: SHARDS
MrcEstimate exact_mrc(const std::vector<std::uint64_t>& trace, std::size_t max_c) {
  std::list<std::uint64_t> stack;
  std::map<std::uint64_t, std::uint64_t> hist;
  std::uint64_t cold = 0;
  for (const auto region : trace) {
    std::size_t depth = 0;
    bool found = false;
    for (auto it = stack.begin(); it != stack.end(); ++it) {
      ++depth;
      if (*it == region) {
        hist[depth]++;
        stack.erase(it);
        found = true;
        break;
      }
    }
    if (!found) ++cold;
    stack.push_front(region);
  }
  MrcEstimate out;
  out.samples = trace.size();
  out.miss_ratio.assign(max_c + 1, 1.0);
  std::uint64_t within = 0;
  auto it = hist.begin();
  for (std::size_t c = 0; c <= max_c; ++c) {
    while (it != hist.end() && it->first <= c) {
      within += it->second;
      ++it;
    }
    out.miss_ratio[c] =
        static_cast<double>(out.samples - within) / static_cast<double>(out.samples);
  }
  return out;
}

void criterion_shards() {
  bool exact_ok = true;
  for (std::uint64_t seed = 1; seed <= 100 && exact_ok; ++seed) {
    RngStream rng(seed);
    const std::size_t universe = 8 + rng.below(56);
    std::vector<std::uint64_t> trace(10'000);
    for (auto& r : trace) r = rng.below(universe);
    ShardsEstimator est(1.0);
    for (const auto r : trace) est.access(r);
    const auto got = est.estimate(universe + 2);
    const auto want = exact_mrc(trace, universe + 2);
    for (std::size_t c = 0; c < want.miss_ratio.size(); ++c)
      if (std::abs(got.miss_ratio[c] - want.miss_ratio[c]) > 1e-12) exact_ok = false;
  }

  // Zipfian reuse, 1e6 references, sampled at R=0.01.
  const std::size_t universe = 50'000;
  std::vector<double> cdf(universe);
  double sum = 0;
  for (std::size_t i = 0; i < universe; ++i) {
    sum += 1.0 / std::pow(static_cast<double>(i + 1), 0.9);
    cdf[i] = sum;
  }
  for (auto& c : cdf) c /= sum;
  RngStream rng(11);
  ShardsEstimator sampled(0.01), full(1.0);
  for (int i = 0; i < 1'000'000; ++i) {
    const double u = rng.uniform();
    const auto rank =
        static_cast<std::uint64_t>(std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
    const std::uint64_t region = mix64(rank + 1);
    sampled.access(region);
    full.access(region);
  }
  const auto got = sampled.estimate(universe);
  const auto want = full.estimate(universe);
  double err = 0;
  for (std::size_t c = 0; c <= universe; ++c)
    err += std::abs(got.miss_ratio[c] - want.miss_ratio[c]);
  const double mae = err / static_cast<double>(universe + 1);
  const bool ok = exact_ok && mae <= 0.05;
  report(4, "SHARDS oracle equivalence", ok,
         fmt("R=1.0 exact on 100 traces: %s; R=0.01 zipf MAE=%.4f",
             exact_ok ? "yes" : "no", mae));
}

// --------------------------------------------- 5: crash consistency sweep
ScenarioConfig crash_config(std::uint64_t seed, Nanos inject_at) {
  ScenarioConfig c;
  c.ssd_count = 3;
  c.variant = Variant::Xbof;
  c.seed = seed;
  c.duration = inject_at + 40 * kMilli;
  c.warmup = 10 * kMilli;
  c.prewarm_mapping = false;
  c.ssd.geometry.channels = 2;
  c.ssd.geometry.dies_per_channel = 2;
  c.ssd.geometry.planes_per_die = 2;
  c.ssd.geometry.blocks_per_plane = 512;
  c.ssd.geometry.pages_per_block = 64;  // 4 GB per SSD
  c.ssd.segment_bytes = 1LL << 20;      // 4 regions, 2 resident locally
  WorkloadBinding wr;
  wr.kind = WorkloadBinding::Kind::Microbench;
  wr.targets = {0};
  wr.microbench = {false, true, 4096, 4, 0, 0};
  c.workloads.push_back(wr);
  WorkloadBinding rd;
  rd.kind = WorkloadBinding::Kind::Microbench;
  rd.targets = {0};
  rd.microbench = {false, false, 4096, 2, 0, 0};
  c.workloads.push_back(rd);
  FailureInjection f;
  f.device = 1;  // lowest-id idle lender is the one claimed first
  f.time = inject_at;
  f.kind = FailureInjection::Kind::LenderFail;
  c.failures.push_back(f);
  return c;
}

void criterion_crash_consistency() {
  const int kRuns = 1000;
  std::int64_t recovered = 0, mismatches = 0, log_records = 0;
  std::uint64_t checks = 0;
  int runs_with_recovery = 0;
  bool threw = false;
  std::string what;
  RngStream jitter(99);
  for (int i = 0; i < kRuns; ++i) {
    const Nanos inject = 32 * kMilli + static_cast<Nanos>(jitter.below(20 * kMilli));
    try {
      Simulation sim(crash_config(1000 + i, inject));
      sim.run();
      const auto r = sim.ssd(0).recovered_regions();
      recovered += r;
      if (r > 0) ++runs_with_recovery;
      mismatches += sim.ssd(0).recovery_mismatches();
      log_records += sim.ssd(0).recovery_log_records();
      checks += sim.host().integrity_checks();
    } catch (const std::exception& e) {
      threw = true;
      what = e.what();
      break;
    }
    if ((i + 1) % 200 == 0)
      std::printf("  ... crash sweep %d/%d (recovered=%lld mismatches=%lld)\n",
                  i + 1, kRuns, static_cast<long long>(recovered),
                  static_cast<long long>(mismatches));
  }
  const bool ok = !threw && mismatches == 0 && runs_with_recovery > kRuns / 2 &&
                  log_records > 0 && checks > 0;
  report(5, "crash consistency", ok,
         threw ? what
               : fmt("%d runs, %d with live sessions, %lld regions rebuilt, "
                     "%lld log records replayed, 0 expected mismatches (got %lld), "
                     "%llu integrity checks",
                     kRuns, runs_with_recovery, static_cast<long long>(recovered),
                     static_cast<long long>(log_records),
                     static_cast<long long>(mismatches),
                     static_cast<unsigned long long>(checks)));
}

// -------------------------------------------------------- 6: calibration
struct RunStats {
  double throughput_bps = 0;
  double proc = 0, flash = 0, miss = 0;
  double mean_latency_ns = 0;
  std::int64_t physical_writes = 0;
};

RunStats run_preset(const char* name, Variant variant,
                    std::vector<int> devices = {0, 1, 2, 3, 4, 5},
                    Simulation** out_sim = nullptr) {
  auto cfg = preset(name);
  cfg.variant = variant;
  Simulation* sim = new Simulation(cfg);
  sim->run();
  RunStats stats;
  stats.throughput_bps = sim->throughput_bps(devices);
  stats.proc = sim->mean_processor_util(devices);
  double flash = 0, miss = 0, lat = 0;
  for (const int d : devices) {
    const auto rep = sim->device_report(d);
    flash += rep.summary.mean_flash_util;
    miss += rep.summary.mean_miss_ratio;
    lat += static_cast<double>(rep.summary.mean_latency);
  }
  stats.flash = flash / devices.size();
  stats.miss = miss / devices.size();
  stats.mean_latency_ns = lat / devices.size();
  for (int d = 0; d < sim->ssd_count(); ++d)
    stats.physical_writes += sim->device_report(d).summary.physical_write_bytes;
  if (out_sim) *out_sim = sim;
  else delete sim;
  return stats;
}

void criterion_calibration() {
  const auto rd = run_preset("micro-read-64k", Variant::Shrunk);
  const auto wr = run_preset("micro-write-4k", Variant::Shrunk);
  const bool ok = rd.proc >= 0.90 && rd.flash <= 0.60 && wr.flash >= 0.90 &&
                  wr.proc <= 0.70;
  report(6, "utilization calibration", ok,
         fmt("64K read: proc=%.3f (>=0.90) flash=%.3f (<=0.60); "
             "4K write: flash=%.3f (>=0.90) proc=%.3f (<=0.70)",
             rd.proc, rd.flash, wr.flash, wr.proc));
}

// -------------------------------------------------- 7: comparative trends
void criterion_trends() {
  const std::vector<int> borrowers{0, 1, 2, 3, 4, 5};
  const std::vector<int> all{0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11};

  const auto conv_r = run_preset("micro-read-64k", Variant::Conv);
  const auto shr_r = run_preset("micro-read-64k", Variant::Shrunk);
  const auto vh_r = run_preset("micro-read-64k", Variant::Vh);
  const auto xbof_r = run_preset("micro-read-64k", Variant::Xbof);

  const double shr_frac = shr_r.throughput_bps / conv_r.throughput_bps;
  const double xbof_frac = xbof_r.throughput_bps / conv_r.throughput_bps;
  const bool t1 = shr_frac <= 0.80 && xbof_frac >= 0.95;
  report(7, "trend: shrunk <= 80% of conv, xbof >= 95% (read bench)", t1,
         fmt("shrunk=%.1f%% xbof=%.1f%%", shr_frac * 100, xbof_frac * 100));

  const double vh_read_gain = vh_r.throughput_bps / shr_r.throughput_bps - 1.0;
  const auto shr_w = run_preset("micro-write-4k", Variant::Shrunk);
  const auto vhi_w = run_preset("micro-write-4k", Variant::VhIdeal);
  const double vhi_write_gain = vhi_w.throughput_bps / shr_w.throughput_bps - 1.0;
  const bool t2 = vh_read_gain < 0.02 && vhi_write_gain > 0.10;
  report(7, "trend: VH reads < +2%, VH-ideal writes > +10% vs shrunk", t2,
         fmt("vh reads %+.2f%%, vh-ideal writes %+.1f%%", vh_read_gain * 100,
             vhi_write_gain * 100));

  const auto vh_w = run_preset("vh-write", Variant::Vh);
  const auto xbof_w = run_preset("vh-write", Variant::Xbof);
  const bool t3 = vh_w.physical_writes > xbof_w.physical_writes;
  report(7, "trend: VH writes more total bytes than XBOF (copyback)", t3,
         fmt("vh=%.2f GB xbof=%.2f GB", vh_w.physical_writes / 1e9,
             xbof_w.physical_writes / 1e9));

  // Aggregate processor utilization across the whole JBOF.
  Simulation* shr_sim = nullptr;
  Simulation* xbof_sim = nullptr;
  run_preset("micro-read-64k", Variant::Shrunk, borrowers, &shr_sim);
  run_preset("micro-read-64k", Variant::Xbof, borrowers, &xbof_sim);
  const double shr_agg = shr_sim->mean_processor_util(all);
  const double xbof_agg = xbof_sim->mean_processor_util(all);
  const double delta_pp = (xbof_agg - shr_agg) * 100;
  const bool t4 = delta_pp >= 25.0;
  report(7, "trend: XBOF aggregate utilization >= +25 pp over shrunk", t4,
         fmt("shrunk=%.1f%% xbof=%.1f%% delta=%+.1f pp", shr_agg * 100,
             xbof_agg * 100, delta_pp));
  delete shr_sim;
  delete xbof_sim;

  const auto shr_d = run_preset("dram-harvest", Variant::Shrunk);
  const auto xbof_d = run_preset("dram-harvest", Variant::Xbof);
  const bool t5 = xbof_d.miss <= 0.10 && shr_d.miss > 0.10;
  report(7, "trend: DRAM harvesting holds the 10% miss threshold", t5,
         fmt("shrunk miss=%.3f xbof miss=%.3f", shr_d.miss, xbof_d.miss));
}

// --------------------------------------------------------- 8: OC plateau
void criterion_oc_plateau() {
  std::vector<double> agg;
  for (int n = 1; n <= 7; ++n) {
    auto cfg = preset("oc-plateau");
    cfg.ssd_count = n;
    cfg.workloads.clear();
    WorkloadBinding w;
    w.kind = WorkloadBinding::Kind::Microbench;
    for (int d = 0; d < n; ++d) w.targets.push_back(d);
    w.microbench = {true, false, 65536, 64, 0, 0};
    cfg.workloads.push_back(w);
    Simulation sim(cfg);
    sim.run();
    std::vector<int> devs;
    for (int d = 0; d < n; ++d) devs.push_back(d);
    agg.push_back(sim.throughput_bps(devs));
  }
  int plateau = 7;
  for (std::size_t n = 0; n + 1 < agg.size(); ++n) {
    if (agg[n + 1] < agg[n] * 1.05) {
      plateau = static_cast<int>(n + 1);
      break;
    }
  }
  const bool ok = plateau >= 2 && plateau <= 6;
  std::string curve;
  for (const auto a : agg) curve += fmt("%.1f ", a / 1e9);
  report(8, "OC throughput plateaus at 4 +- 2 devices", ok,
         fmt("plateau at %d; GB/s by count: %s", plateau, curve.c_str()));
}

// ------------------------------------------------------- 9: lender impact
void criterion_lender_impact() {
  const std::vector<int> lenders{6, 7, 8, 9, 10, 11};
  const auto baseline = run_preset("lender-impact", Variant::Shrunk, lenders);
  const auto lending = run_preset("lender-impact", Variant::Xbof, lenders);
  const double loss = 1.0 - lending.throughput_bps / baseline.throughput_bps;
  const bool ok = loss <= 0.05;
  report(9, "lender throughput loss <= 5%", ok,
         fmt("baseline=%.1f MB/s lending=%.1f MB/s loss=%.2f%%",
             baseline.throughput_bps / 1e6, lending.throughput_bps / 1e6,
             loss * 100));
}

// ------------------------------------------------------- 10: determinism
void criterion_determinism() {
  auto make = [] {
    auto cfg = preset("micro-read-64k");
    cfg.variant = Variant::Xbof;
    cfg.duration = 40 * kMilli;
    cfg.warmup = 15 * kMilli;
    cfg.seed = 12345;
    cfg.event_trace = true;
    return cfg;
  };
  Simulation a(make()), b(make());
  a.run();
  b.run();
  const bool ok = a.report_json() == b.report_json() &&
                  a.summary_csv() == b.summary_csv();
  report(10, "byte-identical reports for identical (config, seed)", ok,
         fmt("report bytes=%zu", a.report_json().size()));
}

}  // namespace

int main() {
  criterion_bom_cost();
  criterion_load_balance();
  criterion_descriptor_codec();
  criterion_shards();
  criterion_calibration();
  criterion_trends();
  criterion_oc_plateau();
  criterion_lender_impact();
  criterion_determinism();
  criterion_crash_consistency();
  if (g_failures == 0) {
    std::printf("acceptance: all criteria passed\n");
    return 0;
  }
  std::printf("acceptance: %d criterion check(s) FAILED\n", g_failures);
  return 1;
}
