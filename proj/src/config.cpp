#include "xbofsim/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace xbofsim {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw std::runtime_error("config: " + path + ": " + what);
}

template <typename T>
void get_field(const json& j, const std::string& path, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    fail(path + "." + key, e.what());
  }
}

void get_nanos_us(const json& j, const std::string& path, const char* key,
                  Nanos& out) {
  if (!j.contains(key)) return;
  try {
    out = static_cast<Nanos>(j.at(key).get<double>() * 1000.0);
  } catch (const json::exception& e) {
    fail(path + "." + key, e.what());
  }
}

void parse_geometry(const json& j, const std::string& path, FlashGeometry& g) {
  get_field(j, path, "channels", g.channels);
  get_field(j, path, "dies_per_channel", g.dies_per_channel);
  get_field(j, path, "planes_per_die", g.planes_per_die);
  get_field(j, path, "blocks_per_plane", g.blocks_per_plane);
  get_field(j, path, "pages_per_block", g.pages_per_block);
  get_field(j, path, "page_size", g.page_size);
  get_field(j, path, "channel_mt_per_s", g.channel_mt_per_s);
}

json geometry_to_json(const FlashGeometry& g) {
  return json{{"channels", g.channels},
              {"dies_per_channel", g.dies_per_channel},
              {"planes_per_die", g.planes_per_die},
              {"blocks_per_plane", g.blocks_per_plane},
              {"pages_per_block", g.pages_per_block},
              {"page_size", g.page_size},
              {"channel_mt_per_s", g.channel_mt_per_s}};
}

void parse_timing(const json& j, const std::string& path, FlashTiming& t) {
  auto arr = [&](const char* key, Nanos* out3) {
    if (!j.contains(key)) return;
    const auto& a = j.at(key);
    if (!a.is_array() || a.size() != 3) fail(path + "." + key, "expected [lsb,csb,msb] ns");
    for (int i = 0; i < 3; ++i) out3[i] = a[i].get<Nanos>();
  };
  arr("read_ns", t.read_ns);
  arr("program_ns", t.program_ns);
  get_field(j, path, "erase_ns", t.erase_ns);
}

json timing_to_json(const FlashTiming& t) {
  return json{{"read_ns", {t.read_ns[0], t.read_ns[1], t.read_ns[2]}},
              {"program_ns", {t.program_ns[0], t.program_ns[1], t.program_ns[2]}},
              {"erase_ns", t.erase_ns}};
}

void parse_workload(const json& j, const std::string& path, WorkloadBinding& w) {
  get_field(j, path, "targets", w.targets);
  std::string kind = "microbench";
  get_field(j, path, "kind", kind);
  if (kind == "microbench") {
    w.kind = WorkloadBinding::Kind::Microbench;
    std::string pattern = "seq", op = "read";
    get_field(j, path, "pattern", pattern);
    get_field(j, path, "op", op);
    if (pattern != "seq" && pattern != "rand") fail(path + ".pattern", "seq|rand");
    if (op != "read" && op != "write") fail(path + ".op", "read|write");
    w.microbench.sequential = pattern == "seq";
    w.microbench.is_write = op == "write";
    get_field(j, path, "size", w.microbench.io_bytes);
    get_field(j, path, "iodepth", w.microbench.iodepth);
    get_field(j, path, "span_bytes", w.microbench.span_bytes);
    get_nanos_us(j, path, "stop_after_us", w.microbench.stop_after);
  } else if (kind == "synthetic") {
    w.kind = WorkloadBinding::Kind::Synthetic;
    get_field(j, path, "read_ratio", w.synthetic.read_ratio);
    get_field(j, path, "mean_read_kb", w.synthetic.mean_read_kb);
    get_field(j, path, "mean_write_kb", w.synthetic.mean_write_kb);
    get_field(j, path, "footprint_bytes", w.synthetic.footprint_bytes);
    get_field(j, path, "rate_iops", w.synthetic.rate_iops);
    get_field(j, path, "iodepth", w.synthetic_iodepth);
    std::string pattern = "zipf";
    get_field(j, path, "pattern", pattern);
    if (pattern == "seq") w.synthetic.pattern = AccessPattern::Sequential;
    else if (pattern == "uniform") w.synthetic.pattern = AccessPattern::Uniform;
    else if (pattern == "zipf") w.synthetic.pattern = AccessPattern::Zipf;
    else fail(path + ".pattern", "seq|uniform|zipf");
    get_field(j, path, "zipf_theta", w.synthetic.zipf_theta);
  } else if (kind == "trace") {
    w.kind = WorkloadBinding::Kind::Trace;
    get_field(j, path, "path", w.trace_path);
    if (w.trace_path.empty()) fail(path + ".path", "trace path required");
  } else {
    fail(path + ".kind", "microbench|synthetic|trace");
  }
}

json workload_to_json(const WorkloadBinding& w) {
  json j;
  j["targets"] = w.targets;
  switch (w.kind) {
    case WorkloadBinding::Kind::Microbench:
      j["kind"] = "microbench";
      j["pattern"] = w.microbench.sequential ? "seq" : "rand";
      j["op"] = w.microbench.is_write ? "write" : "read";
      j["size"] = w.microbench.io_bytes;
      j["iodepth"] = w.microbench.iodepth;
      j["span_bytes"] = w.microbench.span_bytes;
      j["stop_after_us"] = static_cast<double>(w.microbench.stop_after) / 1000.0;
      break;
    case WorkloadBinding::Kind::Synthetic:
      j["kind"] = "synthetic";
      j["read_ratio"] = w.synthetic.read_ratio;
      j["mean_read_kb"] = w.synthetic.mean_read_kb;
      j["mean_write_kb"] = w.synthetic.mean_write_kb;
      j["footprint_bytes"] = w.synthetic.footprint_bytes;
      j["rate_iops"] = w.synthetic.rate_iops;
      j["iodepth"] = w.synthetic_iodepth;
      j["pattern"] = w.synthetic.pattern == AccessPattern::Sequential ? "seq"
                     : w.synthetic.pattern == AccessPattern::Uniform  ? "uniform"
                                                                      : "zipf";
      j["zipf_theta"] = w.synthetic.zipf_theta;
      break;
    case WorkloadBinding::Kind::Trace:
      j["kind"] = "trace";
      j["path"] = w.trace_path;
      break;
  }
  return j;
}

}  // namespace

ScenarioConfig config_from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("config: not valid JSON: ") + e.what());
  }
  ScenarioConfig c;
  std::string variant = "conv";
  get_field(j, "$", "variant", variant);
  c.variant = variant_from_string(variant);
  get_field(j, "$", "ssd_count", c.ssd_count);
  get_field(j, "$", "seed", c.seed);
  get_nanos_us(j, "$", "duration_us", c.duration);
  get_nanos_us(j, "$", "warmup_us", c.warmup);
  get_nanos_us(j, "$", "window_us", c.window);
  get_field(j, "$", "prewarm_mapping", c.prewarm_mapping);
  get_field(j, "$", "preload_data", c.preload_data);
  get_field(j, "$", "event_trace", c.event_trace);
  get_field(j, "$", "output_dir", c.output_dir);

  if (j.contains("ssd")) {
    const auto& s = j.at("ssd");
    if (s.contains("geometry")) parse_geometry(s.at("geometry"), "ssd.geometry", c.ssd.geometry);
    if (s.contains("timing")) parse_timing(s.at("timing"), "ssd.timing", c.ssd.timing);
    get_field(s, "ssd", "core_count", c.ssd.core_count);
    get_field(s, "ssd", "shrunk_core_count", c.ssd.shrunk_core_count);
    get_field(s, "ssd", "core_mhz", c.ssd.core_mhz);
    get_field(s, "ssd", "dram_bytes_per_tb", c.ssd.dram_bytes_per_tb);
    get_field(s, "ssd", "shrunk_dram_bytes_per_tb", c.ssd.shrunk_dram_bytes_per_tb);
    get_field(s, "ssd", "dram_access_ns", c.ssd.dram_access_ns);
    get_field(s, "ssd", "read_ceiling_bps", c.ssd.read_ceiling_bps);
    get_field(s, "ssd", "write_ceiling_bps", c.ssd.write_ceiling_bps);
    get_field(s, "ssd", "write_buffer_bytes", c.ssd.write_buffer_bytes);
    get_field(s, "ssd", "gc_low_watermark", c.ssd.gc_low_watermark);
    get_field(s, "ssd", "gc_high_watermark", c.ssd.gc_high_watermark);
    get_field(s, "ssd", "overprovision", c.ssd.overprovision);
    get_field(s, "ssd", "segment_bytes", c.ssd.segment_bytes);
    get_field(s, "ssd", "agent_dequeue_tenths_ns", c.ssd.agent_dequeue_tenths_ns);
    get_field(s, "ssd", "log_commit_tenths_ns", c.ssd.log_commit_tenths_ns);
    get_field(s, "ssd", "agent_queue_depth", c.ssd.agent_queue_depth);
    get_field(s, "ssd", "firmware_chunk_slices", c.ssd.firmware_chunk_slices);
    get_field(s, "ssd", "daemon_cycles_per_window", c.ssd.daemon_cycles_per_window);
    get_nanos_us(s, "ssd", "write_flush_timeout_us", c.ssd.write_flush_timeout);
    if (s.contains("firmware")) {
      const auto& f = s.at("firmware");
      get_field(f, "ssd.firmware", "fetch_parse", c.ssd.firmware.fetch_parse);
      get_field(f, "ssd.firmware", "translate", c.ssd.firmware.translate);
      get_field(f, "ssd.firmware", "dma_issue", c.ssd.firmware.dma_issue);
      get_field(f, "ssd.firmware", "flash_issue", c.ssd.firmware.flash_issue);
      get_field(f, "ssd.firmware", "completion", c.ssd.firmware.completion);
      get_field(f, "ssd.firmware", "sync", c.ssd.firmware.sync);
    }
  }
  if (j.contains("host")) {
    const auto& h = j.at("host");
    get_field(h, "host", "core_count", c.host.core_count);
    get_field(h, "host", "core_mhz", c.host.core_mhz);
    get_field(h, "host", "dram_bytes", c.host.dram_bytes);
    get_field(h, "host", "cycles_per_command", c.host.cycles_per_command);
    get_field(h, "host", "redirect_decide_ns", c.host.redirect_decide_ns);
    get_field(h, "host", "oc_op_issue_ns", c.host.oc_op_issue_ns);
  }
  if (j.contains("fabric")) {
    const auto& f = j.at("fabric");
    get_field(f, "fabric", "per_device_bandwidth", c.fabric.per_device_bandwidth);
    get_field(f, "fabric", "one_way_latency_ns", c.fabric.one_way_latency);
    get_field(f, "fabric", "flit_bytes", c.fabric.flit_bytes);
  }
  if (j.contains("harvest")) {
    const auto& h = j.at("harvest");
    get_field(h, "harvest", "watermark", c.harvest.watermark);
    get_field(h, "harvest", "dram_threshold", c.harvest.dram.threshold);
    get_field(h, "harvest", "mrc_epsilon", c.harvest.dram.epsilon);
    get_field(h, "harvest", "mrc_min_samples", c.harvest.dram.min_samples);
    get_field(h, "harvest", "borrow_cap_segments", c.harvest.dram.borrow_cap_segments);
    get_field(h, "harvest", "shards_rate", c.harvest.shards_rate);
    get_field(h, "harvest", "shadow_qps_per_ssd", c.harvest.shadow_qps_per_ssd);
    get_field(h, "harvest", "borrow_cap_lenders", c.harvest.borrow_cap_lenders);
    get_nanos_us(h, "harvest", "window_us", c.harvest.window);
    get_nanos_us(h, "harvest", "command_timeout_us", c.harvest.command_timeout);
    get_field(h, "harvest", "timeouts_to_fail", c.harvest.timeouts_to_fail);
    get_field(h, "harvest", "idle_windows_to_lend_dram", c.harvest.idle_windows_to_lend_dram);
  }
  if (j.contains("queues")) {
    const auto& q = j.at("queues");
    get_field(q, "queues", "normal_qps_per_ssd", c.queues.normal_qps_per_ssd);
    get_field(q, "queues", "qp_depth", c.queues.qp_depth);
    get_field(q, "queues", "normal_weight", c.queues.normal_weight);
    get_field(q, "queues", "shadow_weight", c.queues.shadow_weight);
  }
  if (j.contains("workloads")) {
    const auto& ws = j.at("workloads");
    if (!ws.is_array()) fail("workloads", "expected array");
    for (std::size_t i = 0; i < ws.size(); ++i) {
      WorkloadBinding w;
      parse_workload(ws[i], "workloads[" + std::to_string(i) + "]", w);
      c.workloads.push_back(std::move(w));
    }
  }
  if (j.contains("failures")) {
    const auto& fs = j.at("failures");
    if (!fs.is_array()) fail("failures", "expected array");
    for (std::size_t i = 0; i < fs.size(); ++i) {
      const std::string path = "failures[" + std::to_string(i) + "]";
      FailureInjection f;
      get_field(fs[i], path, "device", f.device);
      get_nanos_us(fs[i], path, "time_us", f.time);
      std::string kind = "lender-fail";
      get_field(fs[i], path, "kind", kind);
      if (kind == "lender-fail") f.kind = FailureInjection::Kind::LenderFail;
      else if (kind == "borrower-fail") f.kind = FailureInjection::Kind::BorrowerFail;
      else fail(path + ".kind", "lender-fail|borrower-fail");
      c.failures.push_back(f);
    }
  }
  return c;
}

ScenarioConfig config_from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return config_from_json_text(ss.str());
}

std::string config_to_json_text(const ScenarioConfig& c) {
  json j;
  j["variant"] = to_string(c.variant);
  j["ssd_count"] = c.ssd_count;
  j["seed"] = c.seed;
  j["duration_us"] = static_cast<double>(c.duration) / 1000.0;
  j["warmup_us"] = static_cast<double>(c.warmup) / 1000.0;
  j["window_us"] = static_cast<double>(c.window) / 1000.0;
  j["prewarm_mapping"] = c.prewarm_mapping;
  j["preload_data"] = c.preload_data;
  j["event_trace"] = c.event_trace;
  j["output_dir"] = c.output_dir;
  j["ssd"] = json{
      {"geometry", geometry_to_json(c.ssd.geometry)},
      {"timing", timing_to_json(c.ssd.timing)},
      {"core_count", c.ssd.core_count},
      {"shrunk_core_count", c.ssd.shrunk_core_count},
      {"core_mhz", c.ssd.core_mhz},
      {"dram_bytes_per_tb", c.ssd.dram_bytes_per_tb},
      {"shrunk_dram_bytes_per_tb", c.ssd.shrunk_dram_bytes_per_tb},
      {"dram_access_ns", c.ssd.dram_access_ns},
      {"read_ceiling_bps", c.ssd.read_ceiling_bps},
      {"write_ceiling_bps", c.ssd.write_ceiling_bps},
      {"write_buffer_bytes", c.ssd.write_buffer_bytes},
      {"gc_low_watermark", c.ssd.gc_low_watermark},
      {"gc_high_watermark", c.ssd.gc_high_watermark},
      {"overprovision", c.ssd.overprovision},
      {"segment_bytes", c.ssd.segment_bytes},
      {"agent_dequeue_tenths_ns", c.ssd.agent_dequeue_tenths_ns},
      {"log_commit_tenths_ns", c.ssd.log_commit_tenths_ns},
      {"agent_queue_depth", c.ssd.agent_queue_depth},
      {"firmware_chunk_slices", c.ssd.firmware_chunk_slices},
      {"daemon_cycles_per_window", c.ssd.daemon_cycles_per_window},
      {"write_flush_timeout_us", static_cast<double>(c.ssd.write_flush_timeout) / 1000.0},
      {"firmware",
       json{{"fetch_parse", c.ssd.firmware.fetch_parse},
            {"translate", c.ssd.firmware.translate},
            {"dma_issue", c.ssd.firmware.dma_issue},
            {"flash_issue", c.ssd.firmware.flash_issue},
            {"completion", c.ssd.firmware.completion},
            {"sync", c.ssd.firmware.sync}}},
  };
  j["host"] = json{{"core_count", c.host.core_count},
                   {"core_mhz", c.host.core_mhz},
                   {"dram_bytes", c.host.dram_bytes},
                   {"cycles_per_command", c.host.cycles_per_command},
                   {"redirect_decide_ns", c.host.redirect_decide_ns},
                   {"oc_op_issue_ns", c.host.oc_op_issue_ns}};
  j["fabric"] = json{{"per_device_bandwidth", c.fabric.per_device_bandwidth},
                     {"one_way_latency_ns", c.fabric.one_way_latency},
                     {"flit_bytes", c.fabric.flit_bytes}};
  j["harvest"] = json{{"watermark", c.harvest.watermark},
                      {"dram_threshold", c.harvest.dram.threshold},
                      {"mrc_epsilon", c.harvest.dram.epsilon},
                      {"mrc_min_samples", c.harvest.dram.min_samples},
                      {"borrow_cap_segments", c.harvest.dram.borrow_cap_segments},
                      {"shards_rate", c.harvest.shards_rate},
                      {"shadow_qps_per_ssd", c.harvest.shadow_qps_per_ssd},
                      {"borrow_cap_lenders", c.harvest.borrow_cap_lenders},
                      {"window_us", static_cast<double>(c.harvest.window) / 1000.0},
                      {"command_timeout_us", static_cast<double>(c.harvest.command_timeout) / 1000.0},
                      {"timeouts_to_fail", c.harvest.timeouts_to_fail},
                      {"idle_windows_to_lend_dram", c.harvest.idle_windows_to_lend_dram}};
  j["queues"] = json{{"normal_qps_per_ssd", c.queues.normal_qps_per_ssd},
                     {"qp_depth", c.queues.qp_depth},
                     {"normal_weight", c.queues.normal_weight},
                     {"shadow_weight", c.queues.shadow_weight}};
  j["workloads"] = json::array();
  for (const auto& w : c.workloads) j["workloads"].push_back(workload_to_json(w));
  j["failures"] = json::array();
  for (const auto& f : c.failures) {
    j["failures"].push_back(
        json{{"device", f.device},
             {"time_us", static_cast<double>(f.time) / 1000.0},
             {"kind", f.kind == FailureInjection::Kind::LenderFail ? "lender-fail"
                                                                   : "borrower-fail"}});
  }
  return j.dump(2);
}

std::vector<std::string> ScenarioConfig::validate() const {
  std::vector<std::string> errors;
  if (ssd_count < 1) errors.push_back("ssd_count: must be >= 1");
  if (duration <= 0) errors.push_back("duration_us: must be > 0");
  if (warmup < 0 || warmup >= duration)
    errors.push_back("warmup_us: must be in [0, duration)");
  if (window <= 0) errors.push_back("window_us: must be > 0");
  try {
    ssd.geometry.validate();
  } catch (const std::exception& e) {
    errors.push_back(std::string("ssd.geometry: ") + e.what());
  }
  try {
    ssd.timing.validate();
  } catch (const std::exception& e) {
    errors.push_back(std::string("ssd.timing: ") + e.what());
  }
  if (ssd.core_count < 1) errors.push_back("ssd.core_count: must be >= 1");
  if (host.core_count < 1) errors.push_back("host.core_count: must be >= 1");
  if (ssd.gc_low_watermark <= 0 || ssd.gc_high_watermark <= ssd.gc_low_watermark)
    errors.push_back("ssd.gc watermarks: need 0 < low < high");
  if (fabric.per_device_bandwidth <= 0) errors.push_back("fabric.per_device_bandwidth: must be > 0");
  if (fabric.one_way_latency <= 0) errors.push_back("fabric.one_way_latency_ns: must be > 0");
  if (harvest.watermark <= 0 || harvest.watermark >= 1)
    errors.push_back("harvest.watermark: must be in (0,1)");
  if (harvest.shards_rate <= 0 || harvest.shards_rate > 1)
    errors.push_back("harvest.shards_rate: must be in (0,1]");
  for (std::size_t i = 0; i < workloads.size(); ++i) {
    const auto& w = workloads[i];
    const std::string where = "workloads[" + std::to_string(i) + "]";
    if (w.targets.empty()) errors.push_back(where + ".targets: empty");
    for (const int t : w.targets)
      if (t < 0 || t >= ssd_count)
        errors.push_back(where + ".targets: device " + std::to_string(t) +
                         " does not exist");
    try {
      if (w.kind == WorkloadBinding::Kind::Microbench) w.microbench.validate();
      if (w.kind == WorkloadBinding::Kind::Synthetic) w.synthetic.validate();
    } catch (const std::exception& e) {
      errors.push_back(where + ": " + e.what());
    }
  }
  for (std::size_t i = 0; i < failures.size(); ++i) {
    if (failures[i].device < 0 || failures[i].device >= ssd_count)
      errors.push_back("failures[" + std::to_string(i) + "].device: does not exist");
  }
  return errors;
}

void apply_override(ScenarioConfig& config, const std::string& dotted) {
  const auto eq = dotted.find('=');
  if (eq == std::string::npos)
    throw std::runtime_error("override: expected key=value, got " + dotted);
  const std::string key = dotted.substr(0, eq);
  const std::string value = dotted.substr(eq + 1);
  // Round-trip through JSON so every config key is overridable by path.
  json j = json::parse(config_to_json_text(config));
  json* node = &j;
  std::size_t start = 0;
  std::vector<std::string> parts;
  while (true) {
    const auto dot = key.find('.', start);
    parts.push_back(key.substr(start, dot - start));
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    if (!node->contains(parts[i]))
      throw std::runtime_error("override: unknown key " + key);
    node = &(*node)[parts[i]];
  }
  const std::string& leaf = parts.back();
  if (!node->contains(leaf)) throw std::runtime_error("override: unknown key " + key);
  json& slot = (*node)[leaf];
  if (slot.is_string()) slot = value;
  else if (slot.is_boolean()) slot = (value == "true" || value == "1");
  else if (slot.is_number_integer()) slot = std::stoll(value);
  else if (slot.is_number_unsigned()) slot = static_cast<std::uint64_t>(std::stoull(value));
  else if (slot.is_number_float()) slot = std::stod(value);
  else throw std::runtime_error("override: unsupported key type for " + key);
  config = config_from_json_text(j.dump());
}

}  // namespace xbofsim
