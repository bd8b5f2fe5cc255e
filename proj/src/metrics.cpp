#include "xbofsim/metrics.hpp"

#include <algorithm>
#include <stdexcept>

namespace xbofsim {

const char* to_string(Variant v) {
  switch (v) {
    case Variant::Conv: return "conv";
    case Variant::Shrunk: return "shrunk";
    case Variant::Oc: return "oc";
    case Variant::Vh: return "vh";
    case Variant::VhIdeal: return "vh-ideal";
    case Variant::ProcH: return "proch";
    case Variant::Xbof: return "xbof";
  }
  return "?";
}

Variant variant_from_string(const std::string& s) {
  if (s == "conv") return Variant::Conv;
  if (s == "shrunk") return Variant::Shrunk;
  if (s == "oc") return Variant::Oc;
  if (s == "vh") return Variant::Vh;
  if (s == "vh-ideal") return Variant::VhIdeal;
  if (s == "proch") return Variant::ProcH;
  if (s == "xbof") return Variant::Xbof;
  throw std::invalid_argument("unknown variant: " + s);
}

const char* to_string(Bucket b) {
  switch (b) {
    case Bucket::Host: return "host";
    case Bucket::HostSsd: return "host_ssd";
    case Bucket::Processor: return "processor";
    case Bucket::Dram: return "dram";
    case Bucket::Flash: return "flash";
    case Bucket::InterSsd: return "inter_ssd";
  }
  return "?";
}

double bom_cost(double capacity_tb, Variant variant, const CostModel& m) {
  if (capacity_tb <= 0) throw std::invalid_argument("bom_cost: capacity must be > 0");
  const double flash = capacity_tb * 1024.0 / 128.0 * m.flash_per_128gb;
  const double dram_full = capacity_tb * m.dram_per_gb;  // 1 GB per TB
  switch (variant) {
    case Variant::Conv:
      return flash + dram_full + m.controller + m.other;
    case Variant::Shrunk:
    case Variant::Vh:
    case Variant::VhIdeal:
      return flash + dram_full * m.shrink_factor +
             m.controller * m.shrink_factor + m.other;
    case Variant::Oc:
      return flash + m.oc_controller + m.other;
    case Variant::ProcH:
    case Variant::Xbof:
      return flash + dram_full * m.shrink_factor * m.cxl_uplift +
             m.controller * m.shrink_factor * m.cxl_uplift + m.other;
  }
  throw std::invalid_argument("bom_cost: bad variant");
}

EnergyReport energy_account(const std::vector<DeviceEnergyInputs>& devices,
                            const EnergyParams& p) {
  EnergyReport out;
  const double per_core_w = p.processor_watts / p.processor_ref_cores;
  for (const auto& d : devices) {
    const double busy_s = static_cast<double>(d.flash_busy_ns) * 1e-9;
    out.flash_active_j += p.flash_voltage * p.current_active_a * busy_s;
    const double die_seconds =
        static_cast<double>(d.dies) * static_cast<double>(d.duration) * 1e-9;
    const double idle_s = std::max(0.0, die_seconds - busy_s);
    const double idle_current = d.active ? p.current_busidle_a : p.current_standby_a;
    out.flash_idle_j += p.flash_voltage * idle_current * idle_s;
    out.processor_j += per_core_w * static_cast<double>(d.core_busy_ns) * 1e-9;
    out.dram_j += p.dram_pj_per_bit * static_cast<double>(d.dram_bytes) * 8.0 * 1e-12;
    out.phy_j += p.phy_pj_per_bit * static_cast<double>(d.link_bytes) * 8.0 * 1e-12;
  }
  return out;
}

void DeviceMetrics::record_completion(bool is_write, std::int64_t bytes,
                                      Nanos submit, Nanos complete,
                                      const LatencyBreakdown& buckets) {
  Sample s{submit, complete, bytes, is_write, buckets};
  samples_.push_back(s);
  (is_write ? write_bytes_ : read_bytes_) += bytes;
  const auto idx = static_cast<std::size_t>(complete / window_);
  if (series_.size() <= idx) series_.resize(idx + 1, 0);
  series_[idx] += bytes;
}

void DeviceMetrics::record_utilization(double processor, double flash,
                                       double miss_ratio) {
  util_series_.push_back({processor, flash, miss_ratio});
}

DeviceMetrics::Summary DeviceMetrics::summarize(
    Nanos measure_start, Nanos measure_end, std::int64_t capacity_bytes) const {
  Summary out;
  std::vector<Nanos> lat;
  Nanos lat_sum = 0, queue_sum = 0;
  std::array<double, kBucketCount> bucket_sum{};
  for (const auto& s : samples_) {
    if (s.complete < measure_start || s.complete > measure_end) continue;
    (s.is_write ? out.writes : out.reads)++;
    (s.is_write ? out.write_bytes : out.read_bytes) += s.bytes;
    const Nanos e2e = s.complete - s.submit;
    lat.push_back(e2e);
    lat_sum += e2e;
    queue_sum += e2e - s.buckets.sum();
    for (int b = 0; b < kBucketCount; ++b) bucket_sum[b] += static_cast<double>(s.buckets.ns[b]);
  }
  if (!lat.empty()) {
    std::sort(lat.begin(), lat.end());
    out.mean_latency = lat_sum / static_cast<Nanos>(lat.size());
    out.p50 = lat[lat.size() / 2];
    out.p99 = lat[std::min(lat.size() - 1, (lat.size() * 99) / 100)];
    out.mean_queue_wait = queue_sum / static_cast<Nanos>(lat.size());
    for (int b = 0; b < kBucketCount; ++b)
      out.mean_buckets.ns[b] = static_cast<Nanos>(bucket_sum[b] / static_cast<double>(lat.size()));
  }
  out.physical_write_bytes = physical_write_bytes_;
  out.gc_migrated_pages = gc_migrated_pages_;
  out.gc_erases = gc_erases_;
  if (!util_series_.empty()) {
    double p = 0, f = 0, m = 0;
    std::size_t counted = 0;
    for (std::size_t i = 0; i < util_series_.size(); ++i) {
      const Nanos at = static_cast<Nanos>(i + 1) * window_;
      if (at <= measure_start || at > measure_end) continue;
      p += util_series_[i].processor;
      f += util_series_[i].flash;
      m += util_series_[i].miss_ratio;
      ++counted;
    }
    if (counted > 0) {
      out.mean_processor_util = p / static_cast<double>(counted);
      out.mean_flash_util = f / static_cast<double>(counted);
      out.mean_miss_ratio = m / static_cast<double>(counted);
    }
  }
  // Physical programs over the user bytes that actually reached flash.
  if (user_programmed_bytes_ > 0)
    out.write_amplification = static_cast<double>(physical_write_bytes_) /
                              static_cast<double>(user_programmed_bytes_);
  const double days =
      static_cast<double>(measure_end - measure_start) / (86400.0 * 1e9);
  if (days > 0 && capacity_bytes > 0)
    out.dwpd = static_cast<double>(out.write_bytes) /
               static_cast<double>(capacity_bytes) / days;
  return out;
}

}  // namespace xbofsim
