#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "xbofsim/config.hpp"
#include "xbofsim/simulation.hpp"

using namespace xbofsim;

namespace {

ScenarioConfig load_config(const std::string& config_path,
                           const std::string& preset_name) {
  if (!preset_name.empty()) return preset(preset_name);
  if (!config_path.empty()) return config_from_json_file(config_path);
  return ScenarioConfig{};
}

void apply_common(ScenarioConfig& cfg, const std::string& variant,
                  std::uint64_t seed, bool seed_set, const std::string& out,
                  const std::string& trace, double duration_us,
                  bool event_trace, const std::vector<std::string>& sets) {
  if (!variant.empty()) cfg.variant = variant_from_string(variant);
  if (seed_set) cfg.seed = seed;
  if (!out.empty()) cfg.output_dir = out;
  if (duration_us > 0) cfg.duration = static_cast<Nanos>(duration_us * 1000.0);
  if (event_trace) cfg.event_trace = true;
  if (!trace.empty()) {
    WorkloadBinding w;
    w.kind = WorkloadBinding::Kind::Trace;
    w.trace_path = trace;
    if (w.targets.empty())
      for (int d = 0; d < cfg.ssd_count; ++d) w.targets.push_back(d);
    cfg.workloads.push_back(std::move(w));
  }
  for (const auto& s : sets) apply_override(cfg, s);
}

int cmd_validate(const std::string& config_path) {
  try {
    const auto cfg = config_from_json_file(config_path);
    const auto errors = cfg.validate();
    if (errors.empty()) {
      std::cout << "ok\n";
      return 0;
    }
    for (const auto& e : errors) std::cerr << e << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return 1;
  }
}

int cmd_sweep(const std::string& name, const std::string& out,
              std::uint64_t seed) {
  // Grid sweeps mirroring the sensitivity studies: OC device scaling and
  // core-count x borrower:lender ratio.
  std::filesystem::create_directories(out.empty() ? "sweep-out" : out);
  const std::string base_dir = out.empty() ? "sweep-out" : out;
  std::ofstream csv(std::filesystem::path(base_dir) / "sweep.csv");
  if (name == "oc-plateau") {
    csv << "ssd_count,aggregate_mbps\n";
    for (int n = 1; n <= 8; ++n) {
      auto cfg = preset("oc-plateau");
      cfg.ssd_count = n;
      cfg.seed = seed;
      cfg.workloads.clear();
      WorkloadBinding w;
      w.kind = WorkloadBinding::Kind::Microbench;
      for (int d = 0; d < n; ++d) w.targets.push_back(d);
      w.microbench = MicrobenchSpec{true, false, 65536, 64, 0, 0};
      cfg.workloads.push_back(w);
      Simulation sim(cfg);
      sim.run();
      std::vector<int> all;
      for (int d = 0; d < n; ++d) all.push_back(d);
      const double mbps = sim.throughput_bps(all) / 1e6;
      csv << n << ',' << mbps << '\n';
      std::cout << "oc ssd_count=" << n << " aggregate=" << mbps << " MB/s\n";
    }
    return 0;
  }
  if (name == "cores-ratio") {
    csv << "cores,borrowers,lenders,variant,aggregate_mbps\n";
    for (int cores = 1; cores <= 3; ++cores) {
      for (const auto& [nb, nl] : std::vector<std::pair<int, int>>{
               {11, 1}, {6, 6}, {4, 8}, {2, 10}, {1, 11}}) {
        for (const auto variant : {Variant::Shrunk, Variant::Xbof}) {
          auto cfg = preset("micro-read-64k");
          cfg.seed = seed;
          cfg.variant = variant;
          cfg.ssd.shrunk_core_count = cores;
          cfg.workloads.clear();
          WorkloadBinding w;
          w.kind = WorkloadBinding::Kind::Microbench;
          for (int d = 0; d < nb; ++d) w.targets.push_back(d);
          w.microbench = MicrobenchSpec{true, false, 65536, 64, 0, 0};
          cfg.workloads.push_back(w);
          Simulation sim(cfg);
          sim.run();
          std::vector<int> borrowers;
          for (int d = 0; d < nb; ++d) borrowers.push_back(d);
          const double mbps = sim.throughput_bps(borrowers) / 1e6;
          csv << cores << ',' << nb << ',' << nl << ','
              << to_string(variant) << ',' << mbps << '\n';
          std::cout << "cores=" << cores << " ratio=" << nb << ":" << nl
                    << " variant=" << to_string(variant)
                    << " aggregate=" << mbps << " MB/s\n";
        }
      }
    }
    return 0;
  }
  std::cerr << "unknown sweep preset: " << name
            << " (available: oc-plateau, cores-ratio)\n";
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"xbofsim: discrete-event simulator of a CXL JBOF with inter-SSD "
               "compute-resource sharing"};
  app.require_subcommand(1);

  // run
  auto* run = app.add_subcommand("run", "run one scenario");
  std::string config_path, preset_name, variant, out, trace;
  std::uint64_t seed = 1;
  bool seed_set = false;
  double duration_us = 0;
  bool event_trace = false;
  bool dump_state = false;
  std::vector<std::string> sets;
  run->add_option("--config", config_path, "scenario JSON file");
  run->add_option("--preset", preset_name, "built-in scenario preset");
  run->add_option("--variant", variant, "conv|shrunk|oc|vh|vh-ideal|proch|xbof");
  run->add_option("--seed", seed, "simulation seed")->each([&](const std::string&) {
    seed_set = true;
  });
  run->add_option("--out", out, "output directory for report artifacts");
  run->add_option("--trace", trace, "trace file to replay");
  run->add_option("--duration", duration_us, "duration in microseconds");
  run->add_flag("--event-trace", event_trace, "dump the event dispatch trace");
  run->add_flag("--dump-state", dump_state, "print per-SSD state snapshots");
  run->add_option("--set", sets, "dotted-path override key=value")->take_all();

  // sweep
  auto* sweep = app.add_subcommand("sweep", "run a scenario grid");
  std::string sweep_name, sweep_out;
  std::uint64_t sweep_seed = 1;
  sweep->add_option("--preset", sweep_name, "oc-plateau|cores-ratio")->required();
  sweep->add_option("--out", sweep_out, "output directory");
  sweep->add_option("--seed", sweep_seed, "simulation seed");

  // validate
  auto* validate = app.add_subcommand("validate", "validate a scenario file");
  std::string vconfig;
  validate->add_option("--config", vconfig, "scenario JSON file")->required();

  CLI11_PARSE(app, argc, argv);

  if (validate->parsed()) return cmd_validate(vconfig);
  if (sweep->parsed()) return cmd_sweep(sweep_name, sweep_out, sweep_seed);

  try {
    auto cfg = load_config(config_path, preset_name);
    apply_common(cfg, variant, seed, seed_set, out, trace, duration_us,
                 event_trace, sets);
    Simulation sim(cfg);
    sim.run();
    sim.write_reports();
    std::cout << sim.summary_csv();
    if (dump_state) std::cout << sim.snapshot_all();
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
