#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "xbofsim/fabric.hpp"
#include "xbofsim/flash.hpp"
#include "xbofsim/harvest.hpp"
#include "xbofsim/metrics.hpp"
#include "xbofsim/time.hpp"
#include "xbofsim/workload.hpp"

namespace xbofsim {

struct FirmwareCosts {
  // Cycles. Defaults are the committed calibrated profile (cf. docs).
  std::int64_t fetch_parse = 400;
  std::int64_t translate = 900;    // per 4 KB slice
  std::int64_t dma_issue = 200;    // per slice
  std::int64_t flash_issue = 400;  // per flash op
  std::int64_t completion = 300;
  std::int64_t sync = 300;         // per remote mapping-lock acquire
};

struct SsdHardware {
  // Desk-scale geometry by default (16 GB per SSD); the full Table-scale
  // array is a config override away.
  SsdHardware() {
    geometry.blocks_per_plane = 64;
    geometry.pages_per_block = 64;
  }

  FlashGeometry geometry;
  FlashTiming timing;
  int core_count = 6;
  int shrunk_core_count = 0;  // 0 = core_count / 2
  int core_mhz = 1000;
  std::int64_t dram_bytes_per_tb = 1LL << 30;  // full map
  std::int64_t shrunk_dram_bytes_per_tb = 0;   // 0 = half
  Nanos dram_access_ns = 100;
  std::int64_t read_ceiling_bps = 14'000'000'000;
  std::int64_t write_ceiling_bps = 10'000'000'000;
  std::int64_t write_buffer_bytes = 32LL << 20;
  FirmwareCosts firmware;
  double gc_low_watermark = 0.05;
  double gc_high_watermark = 0.10;
  double overprovision = 0.07;
  std::int64_t segment_bytes = 2LL << 20;
  std::int64_t agent_dequeue_tenths_ns = 1142;  // 114.2 ns
  std::int64_t log_commit_tenths_ns = 3219;     // 321.9 ns
  int agent_queue_depth = 256;
  int firmware_chunk_slices = 4;  // slices per core reservation
  Nanos write_flush_timeout = 1 * kMilli;
  std::int64_t daemon_cycles_per_window = 20'000;
};

struct HostHardware {
  int core_count = 16;
  int core_mhz = 2100;
  std::int64_t dram_bytes = 16LL << 30;
  std::int64_t cycles_per_command = 2100;  // ~1 us split submit/complete
  Nanos redirect_decide_ns = 20;
  Nanos oc_op_issue_ns = 400;  // MMIO push of one wrapped op (OC variant)
};

struct HarvestParams {
  double watermark = 0.75;
  DramPolicy dram;
  double shards_rate = 1.0;  // desk-scale region counts need the exact rate
  int shadow_qps_per_ssd = 4;
  int borrow_cap_lenders = 4;
  Nanos window = 10 * kMilli;
  Nanos command_timeout = 1 * kMilli;
  int timeouts_to_fail = 3;
  int idle_windows_to_lend_dram = 2;
};

struct QueueParams {
  int normal_qps_per_ssd = 1;
  int qp_depth = 256;
  int normal_weight = 2;
  int shadow_weight = 1;
};

struct WorkloadBinding {
  std::vector<int> targets;  // SSD ids
  enum class Kind : std::uint8_t { Microbench, Synthetic, Trace } kind =
      Kind::Microbench;
  MicrobenchSpec microbench;
  SyntheticProfile synthetic;
  int synthetic_iodepth = 0;  // >0: closed loop; 0: open loop at rate_iops
  std::string trace_path;
};

struct FailureInjection {
  int device = 0;
  Nanos time = 0;
  enum class Kind : std::uint8_t { LenderFail, BorrowerFail } kind =
      Kind::LenderFail;
};

struct ScenarioConfig {
  Variant variant = Variant::Conv;
  int ssd_count = 12;
  std::uint64_t seed = 1;
  Nanos duration = 100 * kMilli;
  Nanos warmup = 20 * kMilli;
  Nanos window = 10 * kMilli;
  bool prewarm_mapping = true;
  bool preload_data = true;  // factory-image the logical space at t=0
  bool event_trace = false;
  std::string output_dir;

  SsdHardware ssd;
  HostHardware host;
  FabricConfig fabric;
  HarvestParams harvest;
  QueueParams queues;
  std::vector<WorkloadBinding> workloads;
  std::vector<FailureInjection> failures;

  // Derived helpers.
  std::int64_t ssd_capacity_bytes() const { return ssd.geometry.capacity_bytes(); }
  std::int64_t dram_bytes() const {
    const double tb = static_cast<double>(ssd_capacity_bytes()) / (1LL << 40);
    double per_tb = static_cast<double>(ssd.dram_bytes_per_tb);
    if (variant != Variant::Conv && variant != Variant::Oc) {
      per_tb = ssd.shrunk_dram_bytes_per_tb > 0
                   ? static_cast<double>(ssd.shrunk_dram_bytes_per_tb)
                   : per_tb * 0.5;
    }
    return static_cast<std::int64_t>(tb * per_tb);
  }
  int effective_core_count() const {
    if (variant == Variant::Conv || variant == Variant::Oc) return ssd.core_count;
    if (ssd.shrunk_core_count > 0) return ssd.shrunk_core_count;
    return std::max(1, ssd.core_count / 2);
  }

  std::vector<std::string> validate() const;  // empty = ok
};

// JSON round trip. Parsing reports field-level diagnostics; validate() runs
// semantic checks (device references, ranges).
ScenarioConfig config_from_json_text(const std::string& text);
ScenarioConfig config_from_json_file(const std::string& path);
std::string config_to_json_text(const ScenarioConfig& config);

// Dotted-path override, e.g. "ssd.core_count=3" or "variant=xbof".
void apply_override(ScenarioConfig& config, const std::string& dotted_assignment);

// In-repo presets (scenarios/<name>.json mirror these).
std::vector<std::string> preset_names();
ScenarioConfig preset(const std::string& name);

}  // namespace xbofsim
