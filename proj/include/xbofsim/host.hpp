#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "xbofsim/config.hpp"
#include "xbofsim/runtime.hpp"
#include "xbofsim/ssd.hpp"
#include "xbofsim/workload.hpp"

namespace xbofsim {

// Structured harvest / failure event log, emitted into reports.
struct HarvestEvent {
  Nanos time;
  std::string kind;
  std::string detail;
};

// The JBOF host (DPU): NVMe queue pairs, doorbells, submission/completion,
// shadow-QP binding with probabilistic redirection, VH/OC baselines, failure
// detection and recovery orchestration, data-integrity oracle.
class HostDriver {
 public:
  HostDriver(Platform& platform, std::vector<DeviceMetrics>& metrics);

  void init_queues();
  void start_workloads();
  void refresh_tick();  // descriptor scan + binding upkeep, once per window

  // Workload-facing submission. Returns false if every path is backlogged
  // (open-loop callers park the command in the host pending queue).
  void submit_io(std::unique_ptr<NvmeCommand> cmd);

  // SSD-side completion delivery (called by the executor device).
  void complete_command(std::uint64_t cmd_id, Nanos cq_time,
                        std::vector<std::uint64_t> read_tokens);

  NvmeCommand* command(std::uint64_t id);
  QueuePair* queue(std::uint16_t sqid);
  // Lowest-id unbound shadow SQ of a device (0 = none free).
  std::uint16_t queue_free_shadow(std::uint32_t ssd) const;
  // Lowest-id normal SQ of a device (the borrower QP choice).
  std::uint16_t queue_lowest_normal(std::uint32_t ssd) const;
  void pump_host_pending(std::uint32_t ssd);
  const std::vector<std::unique_ptr<QueuePair>>& all_queues() const {
    return qps_;
  }
  // Sum of WRR weights over a device's active SQs.
  double active_weight_sum(std::uint32_t ssd) const;

  void inject_failure(const FailureInjection& f);

  ComputeComplex& compute() { return compute_; }
  const std::vector<HarvestEvent>& harvest_log() const { return harvest_log_; }
  void log_event(const char* kind, std::string detail);

  std::uint64_t integrity_checks() const { return integrity_checks_; }
  std::uint64_t error_completions() const { return error_completions_; }
  // Test observer: runs at host-side completion, before the command is freed.
  std::function<void(const NvmeCommand&, const std::vector<std::uint64_t>&)>
      completion_hook;
  std::uint64_t integrity_skipped() const { return integrity_skipped_; }
  std::uint64_t completions() const { return completions_; }
  std::size_t inflight_commands() const { return commands_.size(); }
  std::int64_t vh_copyback_bytes() const { return vh_copyback_bytes_; }

  // Spawn one command from a closed-loop slot (internal + test use).
  void closed_loop_fire(int slot_index);

 private:
  struct ClosedLoopSlot {
    int binding = 0;
    std::uint32_t target = 0;
    std::unique_ptr<SyntheticSampler> sampler;  // synthetic closed loop
    MicrobenchSpec bench;                       // microbench
    bool is_microbench = true;
    std::int64_t cursor = 0;
    std::int64_t span = 0;
    bool stopped = false;
  };

  struct ShadowBinding {
    std::uint32_t borrower = 0;
    std::uint32_t lender = 0;
    std::uint16_t shadow_sqid = 0;
    std::uint16_t borrower_sqid = 0;
    int lender_slot = 0;
    std::uint64_t lender_table = 0;
    double p_redirect = 0;
    Nanos utils_updated = 0;
    std::uint32_t last_amount = 0;
  };

  struct VhGroup {
    std::uint32_t borrower = 0;
    std::vector<std::uint32_t> lenders;
    std::map<Lpn, std::uint32_t> extents;  // slice -> holder
    std::map<Lpn, std::uint32_t> copying;  // reclaim chains in flight
    std::size_t rr = 0;
    bool reclaiming = false;
    int reclaim_inflight = 0;
    int below = 0;  // consecutive idle windows for reclaim trigger
  };

  void route_and_submit(std::uint64_t cmd_id);
  void enqueue_to_sq(NvmeCommand* cmd, QueuePair* qp);
  void host_complete(std::uint64_t cmd_id, Nanos at,
                     std::vector<std::uint64_t> read_tokens);
  void oracle_on_write(const NvmeCommand& cmd);
  void oracle_check_read(const NvmeCommand& cmd,
                         const std::vector<std::uint64_t>& tokens);
  void arm_timeout(std::uint64_t cmd_id);
  void on_timeout(std::uint64_t cmd_id);
  void declare_failed(std::uint32_t ssd);
  void vh_tick();
  void vh_reclaim_pump(VhGroup& g);
  std::uint32_t vh_route(NvmeCommand& cmd, VhGroup& g);

  Platform& plat_;
  const ScenarioConfig& cfg_;
  std::vector<DeviceMetrics>& metrics_;
  ComputeComplex compute_;

  std::vector<std::unique_ptr<QueuePair>> qps_;
  std::vector<std::vector<QueuePair*>> device_qps_;
  std::unordered_map<std::uint64_t, std::unique_ptr<NvmeCommand>> commands_;
  std::uint64_t next_cmd_id_ = 1;
  std::vector<std::deque<std::uint64_t>> host_pending_;  // per device

  std::vector<ClosedLoopSlot> slots_;
  std::vector<ShadowBinding> bindings_;
  std::map<std::uint32_t, VhGroup> vh_groups_;
  std::map<int, int> vh_above_;  // consecutive busy windows per device

  // Data-integrity oracle: device -> lpn -> (token, write epoch, inflight).
  struct OracleEntry {
    std::uint64_t token = 0;
    std::uint64_t epoch = 0;
    int inflight_writes = 0;
  };
  std::vector<std::unordered_map<Lpn, OracleEntry>> oracle_;
  struct ReadSnapshot {
    std::vector<std::uint64_t> epochs;
    std::vector<int> inflight;
  };
  std::unordered_map<std::uint64_t, ReadSnapshot> read_snaps_;

  std::vector<int> timeout_streak_;
  std::vector<int> probe_misses_;
  std::vector<bool> declared_failed_;
  std::vector<HarvestEvent> harvest_log_;
  std::uint64_t integrity_checks_ = 0, integrity_skipped_ = 0;
  std::uint64_t completions_ = 0;
  std::uint64_t error_completions_ = 0;
  std::uint64_t write_token_counter_ = 1;
  std::int64_t vh_copyback_bytes_ = 0;
  bool failures_configured_ = false;
};

}  // namespace xbofsim
