#include "xbofsim/simulation.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace xbofsim {

using ordered_json = nlohmann::ordered_json;

Simulation::Simulation(ScenarioConfig config) : cfg_(std::move(config)) {
  const auto errors = cfg_.validate();
  if (!errors.empty()) {
    std::string what = "invalid scenario:";
    for (const auto& e : errors) what += "\n  - " + e;
    throw std::invalid_argument(what);
  }
  engine_ = std::make_unique<Engine>(cfg_.seed);
  host_compute_ = std::make_unique<ComputeComplex>(
      cfg_.host.core_count, cfg_.host.core_mhz, cfg_.window);
  fabric_ = std::make_unique<CxlFabric>(*engine_, cfg_.fabric, cfg_.ssd_count);
  metrics_.resize(cfg_.ssd_count);
  for (auto& m : metrics_) m.set_window(cfg_.window);

  plat_.engine = engine_.get();
  plat_.fabric = fabric_.get();
  plat_.config = &cfg_;
  plat_.ssds = &ssds_;
  plat_.host_compute = host_compute_.get();

  host_ = std::make_unique<HostDriver>(plat_, metrics_);
  plat_.host = host_.get();
  for (int d = 0; d < cfg_.ssd_count; ++d)
    ssds_.push_back(std::make_unique<SsdDevice>(d, plat_, metrics_[d]));
  host_->init_queues();

  if (cfg_.event_trace) {
    engine_->set_trace([this](Nanos t, ActorId a, const char* kind) {
      trace_buffer_ += std::to_string(t);
      trace_buffer_ += ' ';
      trace_buffer_ += std::to_string(a);
      trace_buffer_ += ' ';
      trace_buffer_ += kind;
      trace_buffer_ += '\n';
    });
  }
}

Simulation::~Simulation() = default;

void Simulation::schedule_window_ticks() {
  const Nanos at = (next_window_ + 1) * cfg_.window;
  if (at > cfg_.duration) return;
  engine_->schedule(at - engine_->now(), kFabricActor, "window_tick", [this] {
    const std::int64_t idx = next_window_++;
    for (auto& ssd : ssds_) ssd->monitor_tick(idx);
    host_->refresh_tick();
    schedule_window_ticks();
  });
}

void Simulation::run() {
  for (const auto& f : cfg_.failures) host_->inject_failure(f);
  host_->start_workloads();
  schedule_window_ticks();
  engine_->run_until(cfg_.duration);
}

Simulation::DeviceReport Simulation::device_report(std::uint32_t id) const {
  DeviceReport out;
  out.summary = metrics_[id].summarize(cfg_.warmup, cfg_.duration,
                                       ssds_[id]->logical_bytes());
  const double secs =
      static_cast<double>(cfg_.duration - cfg_.warmup) / 1e9;
  out.read_mbps = static_cast<double>(out.summary.read_bytes) / secs / 1e6;
  out.write_mbps = static_cast<double>(out.summary.write_bytes) / secs / 1e6;
  return out;
}

double Simulation::throughput_bps(const std::vector<int>& devices) const {
  double total = 0;
  const double secs = static_cast<double>(cfg_.duration - cfg_.warmup) / 1e9;
  for (const int d : devices) {
    const auto s = metrics_[d].summarize(cfg_.warmup, cfg_.duration,
                                         ssds_[d]->logical_bytes());
    total += static_cast<double>(s.read_bytes + s.write_bytes) / secs;
  }
  return total;
}

double Simulation::mean_processor_util(const std::vector<int>& devices) const {
  if (devices.empty()) return 0;
  double sum = 0;
  for (const int d : devices) {
    const auto s = metrics_[d].summarize(cfg_.warmup, cfg_.duration,
                                         ssds_[d]->logical_bytes());
    sum += s.mean_processor_util;
  }
  return sum / static_cast<double>(devices.size());
}

std::string Simulation::report_json() const {
  ordered_json j;
  j["schema_version"] = 1;
  j["effective_config"] = ordered_json::parse(config_to_json_text(cfg_));
  j["engine"] = {{"dispatched", engine_->stats().dispatched},
                 {"scheduled", engine_->stats().scheduled},
                 {"cancelled", engine_->stats().cancelled}};
  j["host"] = {{"completions", host_->completions()},
               {"integrity_checks", host_->integrity_checks()},
               {"integrity_skipped", host_->integrity_skipped()},
               {"vh_copyback_bytes", host_->vh_copyback_bytes()}};

  ordered_json devices = ordered_json::array();
  std::vector<DeviceEnergyInputs> energy_in;
  for (int d = 0; d < cfg_.ssd_count; ++d) {
    const auto rep = device_report(d);
    const auto& s = rep.summary;
    ordered_json dj;
    dj["ssd"] = d;
    dj["reads"] = s.reads;
    dj["writes"] = s.writes;
    dj["read_mbps"] = rep.read_mbps;
    dj["write_mbps"] = rep.write_mbps;
    dj["mean_latency_ns"] = s.mean_latency;
    dj["p50_ns"] = s.p50;
    dj["p99_ns"] = s.p99;
    dj["queue_wait_ns"] = s.mean_queue_wait;
    ordered_json buckets;
    for (int b = 0; b < kBucketCount; ++b)
      buckets[to_string(static_cast<Bucket>(b))] = s.mean_buckets.ns[b];
    dj["latency_buckets_ns"] = buckets;
    dj["processor_util"] = s.mean_processor_util;
    dj["flash_util"] = s.mean_flash_util;
    dj["miss_ratio"] = s.mean_miss_ratio;
    dj["write_amplification"] = s.write_amplification;
    dj["dwpd"] = s.dwpd;
    dj["physical_write_bytes"] = s.physical_write_bytes;
    dj["gc_erases"] = s.gc_erases;
    dj["link_bytes"] = fabric_->link_bytes(d);
    ordered_json series = ordered_json::array();
    for (const auto v : metrics_[d].throughput_series()) series.push_back(v);
    dj["throughput_bytes_per_window"] = series;
    ordered_json utils = ordered_json::array();
    for (const auto& u : metrics_[d].utilization_series()) {
      utils.push_back(ordered_json{{"processor", u.processor},
                                   {"flash", u.flash},
                                   {"miss_ratio", u.miss_ratio}});
    }
    dj["utilization_series"] = utils;
    devices.push_back(std::move(dj));

    DeviceEnergyInputs in;
    in.duration = cfg_.duration;
    in.dies = ssds_[d]->flash().geometry().dies_total();
    in.active = ssds_[d]->served_any();
    in.flash_busy_ns = ssds_[d]->flash().busy_ns(FlashOpKind::Read) +
                       ssds_[d]->flash().busy_ns(FlashOpKind::Program) +
                       ssds_[d]->flash().busy_ns(FlashOpKind::Erase);
    in.core_busy_ns =
        cfg_.variant == Variant::Oc ? 0 : ssds_[d]->compute().busy_total_ns();
    in.dram_bytes = ssds_[d]->dram_traffic_bytes();
    in.link_bytes = fabric_->link_bytes(d);
    energy_in.push_back(in);
  }
  j["devices"] = std::move(devices);

  {
    double read_mbps = 0, write_mbps = 0, proc = 0, flash = 0;
    for (int d = 0; d < cfg_.ssd_count; ++d) {
      const auto rep = device_report(d);
      read_mbps += rep.read_mbps;
      write_mbps += rep.write_mbps;
      proc += rep.summary.mean_processor_util;
      flash += rep.summary.mean_flash_util;
    }
    j["aggregate"] = {{"read_mbps", read_mbps},
                      {"write_mbps", write_mbps},
                      {"mean_processor_util", proc / cfg_.ssd_count},
                      {"mean_flash_util", flash / cfg_.ssd_count}};
  }

  const auto energy = energy_account(energy_in);
  j["energy_joules"] = {{"flash_active", energy.flash_active_j},
                        {"flash_idle", energy.flash_idle_j},
                        {"phy", energy.phy_j},
                        {"processor", energy.processor_j},
                        {"dram", energy.dram_j},
                        {"total", energy.total()}};
  const double capacity_tb =
      static_cast<double>(cfg_.ssd_capacity_bytes()) / (1LL << 40);
  j["bom_cost_usd_per_ssd"] = bom_cost(capacity_tb, cfg_.variant);

  ordered_json harvest = ordered_json::array();
  for (const auto& ev : host_->harvest_log()) {
    harvest.push_back(ordered_json{
        {"t_ns", ev.time}, {"kind", ev.kind}, {"detail", ev.detail}});
  }
  j["harvest_log"] = std::move(harvest);
  return j.dump(2) + "\n";
}

std::string Simulation::summary_csv() const {
  std::ostringstream os;
  os << "ssd,reads,writes,read_mbps,write_mbps,mean_latency_ns,p50_ns,p99_ns,"
        "processor_util,flash_util,miss_ratio,write_amplification,dwpd\n";
  for (int d = 0; d < cfg_.ssd_count; ++d) {
    const auto rep = device_report(d);
    const auto& s = rep.summary;
    os << d << ',' << s.reads << ',' << s.writes << ',' << rep.read_mbps << ','
       << rep.write_mbps << ',' << s.mean_latency << ',' << s.p50 << ','
       << s.p99 << ',' << s.mean_processor_util << ',' << s.mean_flash_util
       << ',' << s.mean_miss_ratio << ',' << s.write_amplification << ','
       << s.dwpd << '\n';
  }
  return os.str();
}

void Simulation::write_reports() const {
  if (cfg_.output_dir.empty()) return;
  std::filesystem::create_directories(cfg_.output_dir);
  const auto dir = std::filesystem::path(cfg_.output_dir);
  std::ofstream(dir / "report.json") << report_json();
  std::ofstream(dir / "summary.csv") << summary_csv();
  if (cfg_.event_trace) std::ofstream(dir / "events.trace") << trace_buffer_;
}

std::string Simulation::snapshot_all() const {
  std::string out;
  for (const auto& ssd : ssds_) out += ssd->snapshot();
  return out;
}

int run_scenario_to_exit(ScenarioConfig config) {
  try {
    Simulation sim(std::move(config));
    sim.run();
    sim.write_reports();
    std::cout << sim.summary_csv();
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace xbofsim
