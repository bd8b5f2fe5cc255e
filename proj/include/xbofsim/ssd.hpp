#pragma once

#include <cstdint>
#include <deque>
#include <set>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "xbofsim/config.hpp"
#include "xbofsim/engine.hpp"
#include "xbofsim/fabric.hpp"
#include "xbofsim/flash.hpp"
#include "xbofsim/harvest.hpp"
#include "xbofsim/mapping.hpp"
#include "xbofsim/metrics.hpp"
#include "xbofsim/mrc.hpp"
#include "xbofsim/runtime.hpp"

namespace xbofsim {

class HostDriver;
class SsdDevice;

// Everything a device needs to reach the rest of the platform.
struct Platform {
  Engine* engine = nullptr;
  CxlFabric* fabric = nullptr;
  HostDriver* host = nullptr;
  std::vector<std::unique_ptr<SsdDevice>>* ssds = nullptr;
  const ScenarioConfig* config = nullptr;
  ComputeComplex* host_compute = nullptr;

  SsdDevice& ssd(std::uint32_t id) const { return *(*ssds)[id]; }
  Nanos now() const { return engine->now(); }
};

// Utilization triple sampled once per window by the resource monitor.
struct UtilizationSample {
  double processor = 0;
  double flash = 0;
  double miss_ratio = 0;
};

// One disaggregated SSD: compute-end (firmware cores + metadata cache),
// data-end (DMA pipes, flash backbone, data-end agent), page-mapping FTL
// with greedy GC, and the per-device share of the harvest control plane.
class SsdDevice {
 public:
  SsdDevice(std::uint32_t id, Platform& platform, DeviceMetrics& metrics);

  std::uint32_t id() const { return id_; }

  void attach_queue(QueuePair* qp);
  const std::vector<QueuePair*>& queues() const { return queues_; }

  // Host rang an SQ doorbell on this device (commands may be fetchable).
  void doorbell();

  // Weighted round robin over this device's nonempty SQs.
  QueuePair* wrr_fetch();

  // --- resource monitor / harvest daemon, driven once per window ---
  void monitor_tick(std::int64_t window_idx);
  UtilizationSample last_sample() const { return last_sample_; }

  // --- failure injection ---
  void fail_now();
  bool failed() const { return failed_; }
  // Lender-side cleanup after a borrower died.
  void recycle_lent_resources(std::uint32_t borrower);
  // Borrower-side recovery after a lender died: replay redo logs, repoint
  // directory entries local, resume.
  void recover_from_lender_failure(std::uint32_t lender);

  // --- data-end agent (remote compute enqueues wrapped ops) ---
  Nanos agent_admit(Nanos arrival);

  // --- introspection ---
  std::int64_t logical_bytes() const { return logical_pages_ * 4096; }
  std::int64_t map_pages() const { return map_pages_; }
  MappingCache& mapping_cache() { return *cache_; }
  FlashBackbone& flash() { return *flash_; }
  ComputeComplex& compute() { return *compute_; }
  const DescriptorTable& descriptor_table() const { return table_; }
  std::uint64_t directory_address() const { return directory_region_; }
  std::string snapshot() const;
  std::int64_t dram_traffic_bytes() const { return dram_bytes_; }
  bool device_full() const { return device_full_; }
  bool served_any() const { return served_any_; }
  Nanos last_util_write() const { return last_util_write_; }
  // Recovery bookkeeping: regions rebuilt after a lender failure, how many
  // redo records contributed, and rebuilt images that disagreed with the
  // live map (must stay zero).
  std::int64_t recovered_regions() const { return recovered_regions_; }
  std::int64_t recovery_log_records() const { return recovery_log_records_; }
  std::int64_t recovery_mismatches() const { return recovery_mismatches_; }
  int active_proc_borrows() const { return static_cast<int>(proc_sessions_.size()); }
  bool lending_processor() const { return proc_lend_slot_.has_value(); }

  // Flash-op hook for equivalence tests: fires for every op this device's
  // backbone executes; cmd is null for system work (GC, meta, programs).
  std::function<void(FlashOpKind, const FlashAddress&, const NvmeCommand*)>
      flash_op_hook;

  // --- command execution (runs on the *executor* device) ---
  void begin_command(NvmeCommand* cmd, SsdDevice* owner);

  // Snapshot of mapping entries rebuilt from flash images + redo logs for
  // `region` (recovery oracle surface; also used by acceptance tests).
  std::vector<std::uint32_t> rebuild_region_from_logs(std::int64_t region) const;
  std::vector<std::uint32_t> live_region_entries(std::int64_t region) const;

  // Entry update used by GC and program-apply; routes through the mapping
  // cache (and the offsite write-ahead log when the region lives remotely).
  void apply_mapping_update(Lpn lpn, std::uint32_t new_entry);

 private:
  friend class HostDriver;

  // ---- command pipeline ----
  struct CmdExec {
    NvmeCommand* cmd = nullptr;
    SsdDevice* owner = nullptr;
    Lpn first_lpn = 0;
    int slices = 0;
    int next_slice = 0;
    bool first_chunk = true;
    Nanos ready = 0;  // pipeline cursor
    std::map<std::int64_t, std::vector<int>> pages;  // flash page -> slice idx
    int pages_pending = 0;
    bool job_released = false;  // firmware fetch slot given back
    std::vector<std::uint64_t> read_tokens;
    std::vector<std::int64_t> locked_regions;
  };

  void fetch_pump();
  void start_fetch(NvmeCommand* cmd);
  void translate_step(std::uint64_t cmd_id);
  void finish_translate(CmdExec& ex);
  void issue_reads(CmdExec& ex);
  void page_read_done(std::uint64_t cmd_id, std::int64_t flash_page);
  void start_write_dma(CmdExec& ex);
  void buffer_admit(std::uint64_t cmd_id);
  void completion_stage(std::uint64_t cmd_id);
  void finish_command(std::uint64_t cmd_id);
  void release_locks(CmdExec& ex);

  // Executes mapping-cache actions (fills, demotions, flushes). Returns the
  // stall the *current command* pays; fire-and-forget work is scheduled.
  Nanos run_cache_actions(const std::vector<MappingCache::Action>& actions,
                          NvmeCommand* cmd, Nanos at);

  // ---- FTL internals (owner-side) ----
  struct OpenBlock {
    int block = -1;
    int next_page = 0;
  };
  struct PendingSlice {
    Lpn lpn;
    std::uint64_t token;
    std::uint64_t version;
  };

  std::int64_t global_block(int die, int plane, int block) const;
  FlashAddress address_of_page(std::int64_t flash_page) const;
  std::int64_t flash_page_index(int die, int plane, int block, int page) const;
  std::optional<std::int64_t> allocate_page(bool for_gc);
  void preload_sequential();
  void accept_slice(Lpn lpn, std::uint64_t token);
  void form_program(bool padded);
  void apply_program(std::int64_t flash_page, std::vector<PendingSlice> slices);
  void invalidate_slot(std::uint32_t entry);
  void arm_flush_timer();
  void maybe_start_gc();
  void gc_step();
  void gc_launch_victim(std::int64_t victim);
  void gc_migrate_page(std::int64_t victim, std::shared_ptr<int> pending,
                       const std::vector<std::pair<Lpn, std::uint32_t>>& live);
  void gc_erase_victim(std::int64_t victim);
  std::uint64_t token_at(std::uint32_t entry) const;

  // Mapping page I/O (meta area: append with free-list compaction).
  Nanos read_mapping_page(std::int64_t map_page, Nanos at, NvmeCommand* cmd);
  void flush_mapping_pages(std::int64_t region, const std::vector<int>& pages,
                           Nanos at);
  void meta_append(std::int64_t map_page, Nanos at, int depth);
  void meta_compact(Nanos at, int depth);

  // Offsite metadata (DRAM harvesting, borrower side).
  struct OffsiteSlot {
    std::uint32_t lender = 0;
    int lender_slot = 0;       // segment index at the lender
    std::uint64_t seg_addr = 0;
    std::uint64_t log_addr = 0;
    std::int64_t region = -1;  // currently cached region
    int log_fill = 0;
    std::uint64_t next_seq = 1;
  };
  OffsiteSlot* offsite_slot_of(std::int64_t region);
  void offsite_write(OffsiteSlot& slot, Lpn lpn, std::uint32_t value, Nanos at);
  void flush_offsite_segment(OffsiteSlot& slot, Nanos at);

  // ---- harvest control plane ----
  void harvest_tick();
  void publish_processor_idle();
  void try_borrow_processor();
  void release_processor_sessions();
  void dram_tick();
  void try_borrow_dram(int want_segments);
  void lend_dram(int segments);
  void reclaim_released_dram();
  void release_dram_session(std::size_t idx, bool lender_alive);

  struct ProcSession {
    std::uint32_t lender = 0;
    int slot = 0;
    std::uint64_t table_base = 0;
    std::uint16_t shadow_sqid = 0;
    std::uint16_t borrower_sqid = 0;
  };
  struct DramSession {
    std::uint32_t lender = 0;
    int slot = 0;
    std::uint64_t table_base = 0;
    std::vector<int> slot_ids;  // indexes into offsite_slots_
  };

  bool locks_enabled() const;

  // ---- members ----
  std::uint32_t id_;
  Platform& plat_;
  DeviceMetrics& metrics_;
  const ScenarioConfig& cfg_;
  const SsdHardware& hw_;

  std::unique_ptr<ComputeComplex> own_compute_;
  ComputeComplex* compute_;  // own, or the host complex for OC
  std::unique_ptr<FlashBackbone> flash_;
  RatePipe read_pipe_;
  RatePipe write_pipe_;

  // FTL state.
  std::int64_t logical_pages_ = 0;  // 4 KB slices
  std::int64_t map_pages_ = 0;
  std::vector<std::uint32_t> entries_;
  std::vector<std::uint32_t> flashed_entries_;
  std::unique_ptr<MappingCache> cache_;
  std::unordered_map<std::int64_t, std::uint64_t> flash_tokens_;
  std::vector<std::int32_t> valid_count_;
  std::vector<std::vector<std::uint32_t>> slot_lpns_;
  std::vector<std::vector<int>> free_blocks_;  // per (die, plane)
  std::vector<OpenBlock> user_open_, gc_open_;
  std::size_t user_cursor_ = 0, gc_cursor_ = 0;
  std::int64_t free_block_count_ = 0, managed_blocks_ = 0;
  int user_planes_ = 0;
  bool gc_active_ = false;
  int gc_victims_inflight_ = 0;
  std::set<std::int64_t> gc_busy_blocks_;
  bool device_full_ = false;

  // Meta (mapping page) ring.
  std::vector<std::int64_t> meta_loc_;       // map page -> meta slot
  std::vector<std::int64_t> meta_live_;      // per meta block
  std::vector<std::int64_t> meta_blocks_;    // global block ids
  std::deque<std::int64_t> meta_free_;       // erased meta blocks
  std::int64_t meta_cursor_block_ = -1;      // open block (index into meta_blocks_)
  int meta_cursor_page_ = 0;
  std::vector<std::int64_t> meta_slot_page_;  // meta slot -> map page (or -1)

  // Write buffer.
  std::int64_t buffer_used_ = 0;
  std::vector<PendingSlice> pending_slices_;
  struct BufferedWrite {
    std::uint64_t token;
    std::uint64_t version;
  };
  std::unordered_map<Lpn, BufferedWrite> buffer_map_;
  std::unordered_map<Lpn, std::uint64_t> applied_version_;
  std::uint64_t buffer_version_ = 0;
  std::deque<std::uint64_t> admission_waiters_;  // cmd ids
  std::optional<EventHandle> flush_timer_;

  // Data-end agent.
  DeciNanos agent_cost_;
  Nanos agent_free_ = 0;
  std::deque<Nanos> agent_outstanding_;

  // Queues and fetch.
  std::vector<QueuePair*> queues_;
  std::size_t wrr_index_ = 0;
  int wrr_credit_ = 0;
  int active_jobs_ = 0;
  std::unordered_map<std::uint64_t, CmdExec> inflight_;

  // Monitor state.
  UtilizationSample last_sample_;
  UtilizationSample smoothed_;  // EWMA over windows, drives harvest decisions
  std::uint64_t window_hits_ = 0, window_misses_ = 0;
  std::int64_t window_idx_ = 0;
  int idle_windows_ = 0;
  bool served_any_ = false;
  Nanos last_util_write_ = 0;
  std::int64_t dram_bytes_ = 0;

  // Harvest state.
  DescriptorTable table_;
  DeciNanos log_commit_cost_;
  std::uint64_t directory_region_ = 0;
  std::uint64_t segment_region_base_ = 0;  // my lendable segments (contiguous)
  std::uint64_t segment_list_region_ = 0;
  std::uint64_t log_region_base_ = 0;
  ShardsEstimator shards_;
  std::optional<int> proc_lend_slot_;
  std::uint16_t lend_shadow_sqid_ = 0;
  std::vector<ProcSession> proc_sessions_;
  std::optional<int> dram_lend_slot_;
  int dram_segments_lent_ = 0;
  std::vector<DramSession> dram_sessions_;
  std::vector<OffsiteSlot> offsite_slots_;
  std::int64_t recovered_regions_ = 0;
  std::int64_t recovery_log_records_ = 0;
  std::int64_t recovery_mismatches_ = 0;

  bool failed_ = false;
};

}  // namespace xbofsim
