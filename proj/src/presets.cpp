#include <stdexcept>

#include "xbofsim/config.hpp"

namespace xbofsim {

namespace {

// 6 borrowers + 6 idle lenders, desk-scale devices.
ScenarioConfig desk_base() {
  ScenarioConfig c;
  c.ssd_count = 12;
  c.duration = 80 * kMilli;
  c.warmup = 30 * kMilli;
  return c;
}

WorkloadBinding microbench(std::vector<int> targets, bool seq, bool write,
                           std::int64_t size, int depth) {
  WorkloadBinding w;
  w.kind = WorkloadBinding::Kind::Microbench;
  w.targets = std::move(targets);
  w.microbench.sequential = seq;
  w.microbench.is_write = write;
  w.microbench.io_bytes = size;
  w.microbench.iodepth = depth;
  return w;
}

}  // namespace

std::vector<std::string> preset_names() {
  return {"micro-read-64k", "micro-write-4k", "latency-4k",  "dram-harvest",
          "oc-plateau",     "lender-impact",  "crash-lender", "vh-write",
          "real-like"};
}

ScenarioConfig preset(const std::string& name) {
  if (name == "micro-read-64k") {
    auto c = desk_base();
    c.workloads.push_back(microbench({0, 1, 2, 3, 4, 5}, true, false, 65536, 64));
    return c;
  }
  if (name == "micro-write-4k") {
    auto c = desk_base();
    c.workloads.push_back(microbench({0, 1, 2, 3, 4, 5}, true, true, 4096, 64));
    return c;
  }
  if (name == "latency-4k") {
    auto c = desk_base();
    c.duration = 150 * kMilli;
    c.warmup = 80 * kMilli;
    c.workloads.push_back(microbench({0, 1, 2, 3, 4, 5}, false, false, 4096, 1));
    return c;
  }
  if (name == "dram-harvest") {
    // Footprint sized between the shrunk and full metadata capacities, so
    // the halved cache misses hard while harvesting can cover it.
    auto c = desk_base();
    c.prewarm_mapping = false;
    c.duration = 120 * kMilli;
    c.warmup = 60 * kMilli;
    auto w = microbench({0, 1, 2, 3, 4, 5}, false, false, 4096, 8);
    w.microbench.span_bytes = 12LL << 30;  // 12 GB of a 16 GB device
    c.workloads.push_back(w);
    return c;
  }
  if (name == "oc-plateau") {
    auto c = desk_base();
    c.variant = Variant::Oc;
    c.workloads.push_back(
        microbench({0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11}, true, false, 65536, 64));
    return c;
  }
  if (name == "lender-impact") {
    auto c = desk_base();
    c.duration = 100 * kMilli;
    c.warmup = 40 * kMilli;
    c.workloads.push_back(microbench({0, 1, 2, 3, 4, 5}, true, false, 65536, 64));
    c.workloads.push_back(microbench({6, 7, 8, 9, 10, 11}, false, false, 4096, 1));
    return c;
  }
  if (name == "crash-lender") {
    auto c = desk_base();
    c.variant = Variant::Xbof;
    c.prewarm_mapping = false;
    c.duration = 120 * kMilli;
    c.warmup = 30 * kMilli;
    auto w = microbench({0}, false, true, 4096, 8);
    w.microbench.span_bytes = 12LL << 30;
    c.workloads.push_back(w);
    // The borrower claims the lowest-id idle lender, so that is the one
    // the injection kills.
    FailureInjection f;
    f.device = 1;
    f.time = 80 * kMilli;
    f.kind = FailureInjection::Kind::LenderFail;
    c.failures.push_back(f);
    return c;
  }
  if (name == "vh-write") {
    auto c = desk_base();
    c.duration = 120 * kMilli;
    c.warmup = 10 * kMilli;
    auto w = microbench({0, 1, 2, 3, 4, 5}, true, true, 4096, 64);
    w.microbench.stop_after = 60 * kMilli;  // burst, then reclaim drains
    c.workloads.push_back(w);
    return c;
  }
  if (name == "real-like") {
    // Profile shaped like a read-heavy production volume.
    auto c = desk_base();
    WorkloadBinding w;
    w.kind = WorkloadBinding::Kind::Synthetic;
    w.targets = {0, 1, 2, 3, 4, 5};
    w.synthetic.read_ratio = 0.981;
    w.synthetic.mean_read_kb = 37.0;
    w.synthetic.mean_write_kb = 16.8;
    w.synthetic.footprint_bytes = 8LL << 30;
    w.synthetic.pattern = AccessPattern::Zipf;
    w.synthetic.zipf_theta = 0.99;
    w.synthetic_iodepth = 64;
    c.workloads.push_back(w);
    return c;
  }
  throw std::invalid_argument("unknown preset: " + name);
}

}  // namespace xbofsim
