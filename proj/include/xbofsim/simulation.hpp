#pragma once

#include <memory>
#include <string>
#include <vector>

#include "xbofsim/config.hpp"
#include "xbofsim/host.hpp"
#include "xbofsim/ssd.hpp"

namespace xbofsim {

// One deterministic simulation: (config, seed) fully determines every byte
// of the report artifacts.
class Simulation {
 public:
  explicit Simulation(ScenarioConfig config);
  ~Simulation();

  void run();

  Engine& engine() { return *engine_; }
  HostDriver& host() { return *host_; }
  CxlFabric& fabric() { return *fabric_; }
  SsdDevice& ssd(std::uint32_t id) { return *ssds_[id]; }
  int ssd_count() const { return static_cast<int>(ssds_.size()); }
  const ScenarioConfig& config() const { return cfg_; }
  DeviceMetrics& metrics(std::uint32_t id) { return metrics_[id]; }

  struct DeviceReport {
    DeviceMetrics::Summary summary;
    double read_mbps = 0, write_mbps = 0;
  };
  DeviceReport device_report(std::uint32_t id) const;

  // Aggregate bytes/s over the measurement window for a set of devices.
  double throughput_bps(const std::vector<int>& devices) const;
  double mean_processor_util(const std::vector<int>& devices) const;

  std::string report_json() const;
  std::string summary_csv() const;
  void write_reports() const;  // report.json + summary.csv (+ optional traces)

  std::string snapshot_all() const;

 private:
  void schedule_window_ticks();

  ScenarioConfig cfg_;
  std::unique_ptr<Engine> engine_;
  std::unique_ptr<ComputeComplex> host_compute_;
  std::unique_ptr<CxlFabric> fabric_;
  std::vector<DeviceMetrics> metrics_;
  std::vector<std::unique_ptr<SsdDevice>> ssds_;
  std::unique_ptr<HostDriver> host_;
  Platform plat_;
  std::int64_t next_window_ = 0;
  std::string trace_buffer_;
};

// Runs a scenario and writes artifacts; returns the process exit status.
int run_scenario_to_exit(ScenarioConfig config);

}  // namespace xbofsim
