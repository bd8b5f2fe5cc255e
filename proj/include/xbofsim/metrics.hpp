#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "xbofsim/time.hpp"

namespace xbofsim {

enum class Variant : std::uint8_t { Conv, Shrunk, Oc, Vh, VhIdeal, ProcH, Xbof };

const char* to_string(Variant v);
Variant variant_from_string(const std::string& s);

// Six-bucket per-command latency decomposition. Queueing waits are tracked
// separately so bucket sum + queue wait = end-to-end.
enum class Bucket : std::uint8_t { Host, HostSsd, Processor, Dram, Flash, InterSsd };
constexpr int kBucketCount = 6;
const char* to_string(Bucket b);

struct LatencyBreakdown {
  std::array<Nanos, kBucketCount> ns{};

  Nanos& operator[](Bucket b) { return ns[static_cast<int>(b)]; }
  Nanos at(Bucket b) const { return ns[static_cast<int>(b)]; }
  Nanos sum() const {
    Nanos s = 0;
    for (const auto v : ns) s += v;
    return s;
  }
};

struct CostModel {
  double flash_per_128gb = 4.95;
  double dram_per_gb = 7.2;
  double controller = 48.0;
  double other = 6.0;
  double shrink_factor = 0.5;
  double cxl_uplift = 1.10;
  double oc_controller = 12.0;  // minimal flash-only controller
};

double bom_cost(double capacity_tb, Variant variant, const CostModel& model = {});

struct EnergyParams {
  double flash_voltage = 3.3;
  double current_active_a = 0.025;   // read/program/erase
  double current_busidle_a = 0.005;  // powered die, not busy
  double current_standby_a = 10e-6;  // idle device
  double phy_pj_per_bit = 6.0;
  double processor_watts = 6.45;  // full 6-core complex
  int processor_ref_cores = 6;
  double dram_pj_per_bit = 22.0;
};

struct DeviceEnergyInputs {
  Nanos duration = 0;
  int dies = 0;
  bool active = false;             // served at least one op
  std::int64_t flash_busy_ns = 0;  // sum over dies and op kinds
  std::int64_t core_busy_ns = 0;   // sum over cores
  std::int64_t dram_bytes = 0;
  std::int64_t link_bytes = 0;
};

struct EnergyReport {
  double flash_active_j = 0;
  double flash_idle_j = 0;
  double phy_j = 0;
  double processor_j = 0;
  double dram_j = 0;
  double total() const {
    return flash_active_j + flash_idle_j + phy_j + processor_j + dram_j;
  }
};

EnergyReport energy_account(const std::vector<DeviceEnergyInputs>& devices,
                            const EnergyParams& params = {});

// Per-device accumulation during a run. Completed-command samples are kept
// whole at desk scale so percentiles are exact.
class DeviceMetrics {
 public:
  void set_window(Nanos window) { window_ = window; }

  void record_completion(bool is_write, std::int64_t bytes, Nanos submit,
                         Nanos complete, const LatencyBreakdown& buckets);
  void record_utilization(double processor, double flash, double miss_ratio);
  void add_physical_write(std::int64_t bytes) { physical_write_bytes_ += bytes; }
  void add_user_programmed(std::int64_t bytes) { user_programmed_bytes_ += bytes; }
  void add_gc_erase() { ++gc_erases_; }
  void add_gc_migrated_pages(std::int64_t n) { gc_migrated_pages_ += n; }
  void add_dram_bytes(std::int64_t n) { dram_bytes_ += n; }

  struct Summary {
    std::uint64_t reads = 0, writes = 0;
    std::int64_t read_bytes = 0, write_bytes = 0;
    std::int64_t physical_write_bytes = 0;
    std::int64_t gc_migrated_pages = 0;
    std::uint64_t gc_erases = 0;
    Nanos mean_latency = 0, p50 = 0, p99 = 0;
    LatencyBreakdown mean_buckets;  // averaged over commands
    Nanos mean_queue_wait = 0;
    double mean_processor_util = 0, mean_flash_util = 0, mean_miss_ratio = 0;
    double write_amplification = 0;  // physical / logical write bytes
    double dwpd = 0;                 // at the observed write rate
  };

  Summary summarize(Nanos measure_start, Nanos measure_end,
                    std::int64_t capacity_bytes) const;

  // Bytes completed per window index (10 ms default), reads + writes.
  const std::vector<std::int64_t>& throughput_series() const { return series_; }
  struct UtilSample {
    double processor, flash, miss_ratio;
  };
  const std::vector<UtilSample>& utilization_series() const { return util_series_; }
  std::int64_t total_bytes() const { return read_bytes_ + write_bytes_; }
  std::int64_t dram_bytes() const { return dram_bytes_; }

 private:
  struct Sample {
    Nanos submit, complete;
    std::int64_t bytes;
    bool is_write;
    LatencyBreakdown buckets;
  };

  Nanos window_ = 10 * kMilli;
  std::vector<Sample> samples_;
  std::vector<std::int64_t> series_;
  std::vector<UtilSample> util_series_;
  std::int64_t read_bytes_ = 0, write_bytes_ = 0;
  std::int64_t physical_write_bytes_ = 0;
  std::int64_t user_programmed_bytes_ = 0;
  std::int64_t gc_migrated_pages_ = 0;
  std::uint64_t gc_erases_ = 0;
  std::int64_t dram_bytes_ = 0;
};

}  // namespace xbofsim
