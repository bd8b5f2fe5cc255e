#include "xbofsim/host.hpp"

#include <algorithm>
#include <cassert>
#include <stdexcept>

namespace xbofsim {

namespace {
constexpr std::int64_t kSlice = 4096;
}

HostDriver::HostDriver(Platform& platform, std::vector<DeviceMetrics>& metrics)
    : plat_(platform),
      cfg_(*platform.config),
      metrics_(metrics),
      compute_(platform.config->host.core_count, platform.config->host.core_mhz,
               platform.config->window) {
  oracle_.resize(cfg_.ssd_count);
  timeout_streak_.assign(cfg_.ssd_count, 0);
  probe_misses_.assign(cfg_.ssd_count, 0);
  declared_failed_.assign(cfg_.ssd_count, false);
  host_pending_.resize(cfg_.ssd_count);
  device_qps_.resize(cfg_.ssd_count);
  failures_configured_ = !cfg_.failures.empty();
}

void HostDriver::init_queues() {
  std::uint16_t next_sqid = 1;
  for (int d = 0; d < cfg_.ssd_count; ++d) {
    for (int q = 0; q < cfg_.queues.normal_qps_per_ssd; ++q) {
      auto qp = std::make_unique<QueuePair>();
      qp->sqid = next_sqid++;
      qp->ssd = static_cast<std::uint32_t>(d);
      qp->role = QueueRole::Normal;
      qp->weight = cfg_.queues.normal_weight;
      qp->depth = cfg_.queues.qp_depth;
      device_qps_[d].push_back(qp.get());
      plat_.ssd(d).attach_queue(qp.get());
      qps_.push_back(std::move(qp));
    }
    // Shadow QPs are pre-reserved at init and bound on demand.
    for (int q = 0; q < cfg_.harvest.shadow_qps_per_ssd; ++q) {
      auto qp = std::make_unique<QueuePair>();
      qp->sqid = next_sqid++;
      qp->ssd = static_cast<std::uint32_t>(d);
      qp->role = QueueRole::Shadow;
      qp->weight = cfg_.queues.shadow_weight;
      qp->depth = cfg_.queues.qp_depth;
      device_qps_[d].push_back(qp.get());
      plat_.ssd(d).attach_queue(qp.get());
      qps_.push_back(std::move(qp));
    }
  }
}

QueuePair* HostDriver::queue(std::uint16_t sqid) {
  if (sqid == 0 || sqid > qps_.size()) return nullptr;
  return qps_[sqid - 1].get();
}

std::uint16_t HostDriver::queue_free_shadow(std::uint32_t ssd) const {
  for (const auto* qp : device_qps_[ssd]) {
    if (qp->role == QueueRole::Shadow && !qp->bound) return qp->sqid;
  }
  return 0;
}

std::uint16_t HostDriver::queue_lowest_normal(std::uint32_t ssd) const {
  for (const auto* qp : device_qps_[ssd]) {
    if (qp->role == QueueRole::Normal) return qp->sqid;
  }
  return 0;
}

double HostDriver::active_weight_sum(std::uint32_t ssd) const {
  double sum = 0;
  for (const auto* qp : device_qps_[ssd]) {
    if (qp->role == QueueRole::Normal || qp->bound) sum += qp->weight;
  }
  return sum;
}

NvmeCommand* HostDriver::command(std::uint64_t id) {
  auto it = commands_.find(id);
  return it == commands_.end() ? nullptr : it->second.get();
}

void HostDriver::log_event(const char* kind, std::string detail) {
  harvest_log_.push_back({plat_.now(), kind, std::move(detail)});
}

void HostDriver::start_workloads() {
  for (std::size_t b = 0; b < cfg_.workloads.size(); ++b) {
    const auto& w = cfg_.workloads[b];
    switch (w.kind) {
      case WorkloadBinding::Kind::Microbench: {
        for (const int target : w.targets) {
          for (int d = 0; d < w.microbench.iodepth; ++d) {
            ClosedLoopSlot slot;
            slot.binding = static_cast<int>(b);
            slot.target = static_cast<std::uint32_t>(target);
            slot.is_microbench = true;
            slot.bench = w.microbench;
            slot.span = w.microbench.span_bytes > 0
                            ? w.microbench.span_bytes
                            : plat_.ssd(target).logical_bytes();
            // Stagger sequential streams so queues interleave; keep the
            // cursors aligned to the I/O size.
            const std::int64_t stride = slot.span / w.microbench.iodepth;
            slot.cursor = (stride / w.microbench.io_bytes) * w.microbench.io_bytes * d;
            slots_.push_back(std::move(slot));
            const int idx = static_cast<int>(slots_.size()) - 1;
            plat_.engine->schedule(0, kHostActor, "workload_start",
                                   [this, idx] { closed_loop_fire(idx); });
          }
        }
        break;
      }
      case WorkloadBinding::Kind::Synthetic: {
        if (w.synthetic_iodepth > 0) {
          for (const int target : w.targets) {
            for (int d = 0; d < w.synthetic_iodepth; ++d) {
              ClosedLoopSlot slot;
              slot.binding = static_cast<int>(b);
              slot.target = static_cast<std::uint32_t>(target);
              slot.is_microbench = false;
              slot.sampler = std::make_unique<SyntheticSampler>(
                  w.synthetic, cfg_.seed ^ (0x9E37ULL * (b + 1)) ^
                                   (static_cast<std::uint64_t>(target) << 32) ^ d);
              slots_.push_back(std::move(slot));
              const int idx = static_cast<int>(slots_.size()) - 1;
              plat_.engine->schedule(0, kHostActor, "workload_start",
                                     [this, idx] { closed_loop_fire(idx); });
            }
          }
        } else {
          for (const int target : w.targets) {
            auto records =
                generate(w.synthetic, cfg_.duration,
                         cfg_.seed ^ (0xA5A5ULL * (b + 1)) ^ target,
                         static_cast<std::uint32_t>(target));
            for (const auto& r : records) {
              const Nanos at = r.timestamp_us * 1000;
              plat_.engine->schedule(at, kHostActor, "trace_arrival", [this, r] {
                auto cmd = std::make_unique<NvmeCommand>();
                cmd->owner = r.device;
                cmd->route_ssd = r.device;
                cmd->is_write = r.is_write;
                cmd->offset = r.offset % plat_.ssd(r.device).logical_bytes();
                cmd->size = r.size;
                cmd->created = plat_.now();
                submit_io(std::move(cmd));
              });
            }
          }
        }
        break;
      }
      case WorkloadBinding::Kind::Trace: {
        auto loaded = load_trace_file(w.trace_path);
        for (const auto& warning : loaded.warnings)
          log_event("trace.warning", warning);
        for (const auto& r : loaded.records) {
          const std::uint32_t target =
              w.targets[r.device % w.targets.size()];
          const Nanos at = r.timestamp_us * 1000;
          if (at > cfg_.duration) continue;
          plat_.engine->schedule(at, kHostActor, "trace_arrival", [this, r, target] {
            auto cmd = std::make_unique<NvmeCommand>();
            cmd->owner = target;
            cmd->route_ssd = target;
            cmd->is_write = r.is_write;
            const std::int64_t cap = plat_.ssd(target).logical_bytes();
            std::int64_t off = r.offset;
            if (off + r.size > cap) off = off % std::max<std::int64_t>(kSlice, cap - r.size);
            cmd->offset = (off / kSlice) * kSlice;
            cmd->size = r.size;
            cmd->created = plat_.now();
            submit_io(std::move(cmd));
          });
        }
        break;
      }
    }
  }
}

void HostDriver::closed_loop_fire(int slot_index) {
  ClosedLoopSlot& slot = slots_[slot_index];
  if (slot.stopped || plat_.ssd(slot.target).failed()) return;
  const auto& w = cfg_.workloads[slot.binding];
  if (slot.is_microbench && slot.bench.stop_after > 0 &&
      plat_.now() >= slot.bench.stop_after) {
    slot.stopped = true;
    return;
  }
  auto cmd = std::make_unique<NvmeCommand>();
  cmd->owner = slot.target;
  cmd->route_ssd = slot.target;
  cmd->created = plat_.now();
  cmd->workload_slot = slot_index;
  if (slot.is_microbench) {
    cmd->is_write = slot.bench.is_write;
    cmd->size = slot.bench.io_bytes;
    if (slot.bench.sequential) {
      if (slot.cursor + cmd->size > slot.span) slot.cursor = 0;
      cmd->offset = slot.cursor;
      slot.cursor += cmd->size;
    } else {
      const std::int64_t pages = slot.span / kSlice;
      const std::int64_t max_start =
          std::max<std::int64_t>(1, pages - cmd->size / kSlice);
      cmd->offset = static_cast<std::int64_t>(
                        plat_.engine->rng("microbench").below(max_start)) *
                    kSlice;
    }
  } else {
    auto r = slot.sampler->next();
    cmd->is_write = r.is_write;
    cmd->size = r.size;
    cmd->offset = r.offset % plat_.ssd(slot.target).logical_bytes();
    (void)w;
  }
  submit_io(std::move(cmd));
}

void HostDriver::submit_io(std::unique_ptr<NvmeCommand> cmd) {
  cmd->id = next_cmd_id_++;
  cmd->submit_time = cmd->created;
  if (cmd->is_write && cmd->workload_slot >= -1) {
    cmd->write_token = (write_token_counter_ += cmd->size / kSlice);
    oracle_on_write(*cmd);
  } else if (!cmd->is_write && cmd->workload_slot != -2) {
    // Snapshot write epochs: a read is only strictly checkable when no
    // write to its slices completed anywhere inside its lifetime.
    ReadSnapshot snap;
    const std::int64_t first = cmd->offset / kSlice;
    const std::int64_t slices = (cmd->size + kSlice - 1) / kSlice;
    for (std::int64_t i = 0; i < slices; ++i) {
      const auto& e = oracle_[cmd->owner][first + i];
      snap.epochs.push_back(e.epoch);
      snap.inflight.push_back(e.inflight_writes);
    }
    read_snaps_.emplace(cmd->id, std::move(snap));
  }
  const std::uint64_t id = cmd->id;
  commands_.emplace(id, std::move(cmd));
  // Submission half of the host I/O stack.
  NvmeCommand* c = command(id);
  const auto resv = compute_.reserve(
      compute_.cycles_to_ns(cfg_.host.cycles_per_command / 2), c->created);
  c->charge(Bucket::Host, resv.start, resv.end);
  plat_.engine->schedule(resv.end - plat_.now(), kHostActor, "route_submit",
                         [this, id] { route_and_submit(id); });
}

void HostDriver::route_and_submit(std::uint64_t cmd_id) {
  NvmeCommand* cmd = command(cmd_id);
  if (!cmd) return;
  std::uint32_t route = cmd->owner;
  std::uint16_t sqid = 0;

  if (cfg_.variant == Variant::Vh || cfg_.variant == Variant::VhIdeal) {
    auto it = vh_groups_.find(cmd->owner);
    if (it != vh_groups_.end()) route = vh_route(*cmd, it->second);
  } else if (cfg_.variant == Variant::ProcH || cfg_.variant == Variant::Xbof) {
    // Route across the borrower queue and every bound shadow queue with
    // weights 1 : 1/ratio_i from the load-balance formula.
    double total = 1.0;
    std::vector<std::pair<double, std::uint16_t>> shares;
    for (auto& b : bindings_) {
      if (b.borrower != cmd->owner) continue;
      if (plat_.now() - b.utils_updated > 2 * cfg_.harvest.window) continue;
      // Applied probability is capped: the shadow SQ never outdraws the
      // borrower's own queue.
      const double p = std::min(b.p_redirect, 0.5);
      if (p <= 0 || p >= 1) continue;
      const double share = p / (1.0 - p);  // 1/ratio
      shares.emplace_back(share, b.shadow_sqid);
      total += share;
    }
    if (!shares.empty()) {
      const auto resv =
          compute_.reserve(cfg_.host.redirect_decide_ns, plat_.now());
      cmd->charge(Bucket::Host, resv.start, resv.end);
      double u = plat_.engine->rng("redirect").uniform() * total;
      for (const auto& [share, shadow] : shares) {
        if (u < share) {
          cmd->redirected = true;
          sqid = shadow;
          break;
        }
        u -= share;
      }
    }
  }
  cmd->route_ssd = route;
  if (sqid == 0) sqid = queue_lowest_normal(route);
  QueuePair* qp = queue(sqid);
  if (!qp) throw std::logic_error("host: no SQ for device");
  if (qp->sq_full()) {
    host_pending_[route].push_back(cmd_id);
    return;
  }
  enqueue_to_sq(cmd, qp);
}

void HostDriver::enqueue_to_sq(NvmeCommand* cmd, QueuePair* qp) {
  cmd->sqid = qp->sqid;
  qp->sq.push_back(cmd->id);
  if (failures_configured_) arm_timeout(cmd->id);
  // Doorbell: one MMIO write reaches the device a propagation delay later.
  const std::uint32_t dev = qp->ssd;
  plat_.engine->schedule(plat_.fabric->config().one_way_latency, ssd_actor(dev),
                         "doorbell", [this, dev] { plat_.ssd(dev).doorbell(); });
}

void HostDriver::pump_host_pending(std::uint32_t ssd) {
  auto& pending = host_pending_[ssd];
  while (!pending.empty()) {
    NvmeCommand* cmd = command(pending.front());
    if (!cmd) {
      pending.pop_front();
      continue;
    }
    QueuePair* qp = queue(cmd->sqid ? cmd->sqid : queue_lowest_normal(ssd));
    if (!qp || qp->sq_full()) return;
    pending.pop_front();
    enqueue_to_sq(cmd, qp);
  }
}

void HostDriver::complete_command(std::uint64_t cmd_id, Nanos cq_time,
                                  std::vector<std::uint64_t> read_tokens) {
  NvmeCommand* cmd = command(cmd_id);
  if (!cmd) return;
  if (cmd->completed)
    throw std::logic_error("host: duplicate completion for command " +
                           std::to_string(cmd_id));
  // Completion half of the host I/O stack (interrupt + CQ doorbell).
  const auto resv = compute_.reserve(
      compute_.cycles_to_ns(cfg_.host.cycles_per_command / 2), cq_time);
  cmd->charge(Bucket::Host, resv.start, resv.end);
  const std::uint64_t id = cmd_id;
  plat_.engine->schedule(resv.end - plat_.now(), kHostActor, "host_complete",
                         [this, id, tokens = std::move(read_tokens)]() mutable {
                           host_complete(id, plat_.now(), std::move(tokens));
                         });
}

void HostDriver::host_complete(std::uint64_t cmd_id, Nanos at,
                               std::vector<std::uint64_t> tokens) {
  NvmeCommand* cmd = command(cmd_id);
  if (!cmd || cmd->completed) return;
  cmd->completed = true;
  ++completions_;
  if (cmd->error) ++error_completions_;
  if (completion_hook) completion_hook(*cmd, tokens);
  if (cmd->is_write && cmd->workload_slot != -2) {
    const std::int64_t first = cmd->offset / kSlice;
    const std::int64_t slices = (cmd->size + kSlice - 1) / kSlice;
    for (std::int64_t s = 0; s < slices; ++s) {
      auto& e = oracle_[cmd->owner][first + s];
      e.inflight_writes--;
      if (!cmd->error) {
        e.token = cmd->write_token + s;
        e.epoch++;
      }
    }
  } else if (!cmd->is_write && !cmd->error && cmd->workload_slot != -2) {
    oracle_check_read(*cmd, tokens);
  }

  read_snaps_.erase(cmd_id);
  const bool internal = cmd->workload_slot == -2;
  if (!internal && !cmd->error) {
    metrics_[cmd->owner].record_completion(cmd->is_write, cmd->size,
                                           cmd->submit_time, at, cmd->buckets);
  }

  // VH copyback chain: a finished copy-read spawns the borrower write; the
  // write completion retires the chain.
  if (internal && !cmd->is_write) {
    auto git = vh_groups_.find(cmd->owner);
    if (git != vh_groups_.end()) {
      VhGroup& g = git->second;
      auto wr = std::make_unique<NvmeCommand>();
      wr->owner = g.borrower;
      wr->route_ssd = g.borrower;
      wr->is_write = true;
      wr->offset = cmd->offset;
      wr->size = cmd->size;
      wr->created = plat_.now();
      wr->workload_slot = -2;
      // Copybacks replay the read-back tokens slice for slice.
      wr->write_token = tokens.empty() ? 0 : tokens[0];
      wr->vh_tokens = tokens;
      vh_copyback_bytes_ += wr->size;
      submit_io(std::move(wr));
    }
  } else if (internal && cmd->is_write) {
    auto git = vh_groups_.find(cmd->owner);
    if (git != vh_groups_.end()) {
      VhGroup& g = git->second;
      const Lpn first = cmd->offset / kSlice;
      const std::int64_t n = (cmd->size + kSlice - 1) / kSlice;
      for (std::int64_t i = 0; i < n; ++i) g.copying.erase(first + i);
      --g.reclaim_inflight;
      vh_reclaim_pump(g);
    }
  }

  const int slot = cmd->workload_slot;
  commands_.erase(cmd_id);
  if (slot >= 0) closed_loop_fire(slot);
}

void HostDriver::oracle_on_write(const NvmeCommand& cmd) {
  const std::int64_t first = cmd.offset / kSlice;
  const std::int64_t slices = (cmd.size + kSlice - 1) / kSlice;
  for (std::int64_t s = 0; s < slices; ++s)
    oracle_[cmd.owner][first + s].inflight_writes++;
}

void HostDriver::oracle_check_read(const NvmeCommand& cmd,
                                   const std::vector<std::uint64_t>& tokens) {
  const std::int64_t first = cmd.offset / kSlice;
  const auto snap_it = read_snaps_.find(cmd.id);
  for (std::size_t s = 0; s < tokens.size(); ++s) {
    auto& e = oracle_[cmd.owner][first + static_cast<std::int64_t>(s)];
    const bool epoch_moved =
        snap_it == read_snaps_.end() || s >= snap_it->second.epochs.size() ||
        snap_it->second.epochs[s] != e.epoch;
    if (e.inflight_writes > 0 || epoch_moved) {
      ++integrity_skipped_;  // concurrent writer: result is racy by contract
      continue;
    }
    ++integrity_checks_;
    if (tokens[s] != e.token) {
      throw std::logic_error(
          "data integrity violation: ssd=" + std::to_string(cmd.owner) +
          " lpn=" + std::to_string(first + static_cast<std::int64_t>(s)) +
          " got=" + std::to_string(tokens[s]) +
          " want=" + std::to_string(e.token));
    }
  }
}

void HostDriver::arm_timeout(std::uint64_t cmd_id) {
  plat_.engine->schedule(cfg_.harvest.command_timeout, kHostActor, "cmd_timeout",
                         [this, cmd_id] { on_timeout(cmd_id); });
}

void HostDriver::on_timeout(std::uint64_t cmd_id) {
  NvmeCommand* cmd = command(cmd_id);
  if (!cmd || cmd->completed) return;
  QueuePair* qp = queue(cmd->sqid);
  if (!qp) return;
  const std::uint32_t dev = qp->ssd;
  if (!plat_.ssd(dev).failed()) {
    // Device is alive but slow; count the streak and rearm.
    cmd->timeouts++;
    arm_timeout(cmd_id);
    return;
  }
  timeout_streak_[dev]++;
  if (timeout_streak_[dev] >= cfg_.harvest.timeouts_to_fail) declare_failed(dev);
}

void HostDriver::declare_failed(std::uint32_t dev) {
  if (declared_failed_[dev]) return;
  declared_failed_[dev] = true;
  log_event("failure.declared", "ssd=" + std::to_string(dev));

  // Borrowers that were leaning on this device recover their metadata and
  // get their in-flight shadow commands resubmitted.
  for (int b = 0; b < cfg_.ssd_count; ++b) {
    if (b == static_cast<int>(dev) || plat_.ssd(b).failed()) continue;
    plat_.ssd(b).recover_from_lender_failure(dev);
    plat_.ssd(b).recycle_lent_resources(dev);
  }
  // Unbind shadow QPs involving the dead device.
  for (auto it = bindings_.begin(); it != bindings_.end();) {
    if (it->lender == dev || it->borrower == dev) {
      if (QueuePair* qp = queue(it->shadow_sqid); qp) {
        qp->bound = false;
        qp->sq.clear();
      }
      it = bindings_.erase(it);
    } else {
      ++it;
    }
  }
  // Sweep commands: resubmit redirected work of live owners; error out
  // commands whose data lives on the dead device.
  std::vector<std::uint64_t> resubmit, dead;
  for (auto& [id, cmd] : commands_) {
    if (cmd->completed) continue;
    QueuePair* qp = queue(cmd->sqid);
    const std::uint32_t exec_dev = qp ? qp->ssd : cmd->route_ssd;
    if (cmd->owner == dev || cmd->route_ssd == dev) {
      dead.push_back(id);
    } else if (exec_dev == dev) {
      resubmit.push_back(id);
    }
  }
  std::sort(resubmit.begin(), resubmit.end());
  std::sort(dead.begin(), dead.end());
  for (const auto id : dead) {
    NvmeCommand* cmd = command(id);
    cmd->error = true;
    cmd->completed = true;
    if (cmd->is_write && cmd->workload_slot != -2) {
      const std::int64_t first = cmd->offset / kSlice;
      const std::int64_t slices = (cmd->size + kSlice - 1) / kSlice;
      for (std::int64_t s = 0; s < slices; ++s)
        oracle_[cmd->owner][first + s].inflight_writes--;
    }
    commands_.erase(id);
  }
  for (const auto id : resubmit) {
    NvmeCommand* cmd = command(id);
    cmd->redirected = false;
    log_event("failure.resubmit", "cmd=" + std::to_string(id) + " to=" +
                                      std::to_string(cmd->owner));
    QueuePair* qp = queue(queue_lowest_normal(cmd->owner));
    if (qp) {
      // Drop any stale copy still sitting in the dead device's shadow SQ.
      if (QueuePair* old = queue(cmd->sqid); old)
        old->sq.erase(std::remove(old->sq.begin(), old->sq.end(), id),
                      old->sq.end());
      enqueue_to_sq(cmd, qp);
    }
  }
  // Closed-loop slots bound to the dead device stop.
  for (auto& slot : slots_)
    if (slot.target == dev) slot.stopped = true;
}

void HostDriver::inject_failure(const FailureInjection& f) {
  plat_.engine->schedule(f.time, ssd_actor(f.device), "inject_failure", [this, f] {
    plat_.ssd(f.device).fail_now();
  });
}

// ---------------- refresh: shadow bindings + VH ----------------

void HostDriver::refresh_tick() {
  // Keep-alive probes: a device that stops answering admin-level I/O for a
  // few windows is declared failed even when no data commands target it.
  if (failures_configured_) {
    for (int d = 0; d < cfg_.ssd_count; ++d) {
      if (declared_failed_[d]) continue;
      if (plat_.ssd(d).failed()) {
        if (++probe_misses_[d] >= cfg_.harvest.timeouts_to_fail) declare_failed(d);
      } else {
        probe_misses_[d] = 0;
      }
    }
  }
  if (cfg_.variant == Variant::ProcH || cfg_.variant == Variant::Xbof) {
    // Scan every descriptor table for live processor sessions.
    std::vector<ShadowBinding> fresh;
    for (int lender = 0; lender < cfg_.ssd_count; ++lender) {
      if (plat_.ssd(lender).failed()) continue;
      const auto base = plat_.ssd(lender).descriptor_table().base();
      const auto descs =
          DescriptorTable::read_all(*plat_.fabric, kFabricActor, base);
      for (int slot = 0; slot < DescriptorTable::kSlots; ++slot) {
        const auto& d = descs[slot];
        if (!d.valid || d.unclaimed() || d.type != ResourceType::Processor)
          continue;
        if (d.borrower_cqid() == 0 || d.shadow_cqid() == 0) continue;  // not ready
        ShadowBinding b;
        b.borrower = d.borrower_id;
        b.lender = static_cast<std::uint32_t>(lender);
        b.shadow_sqid = d.shadow_cqid();
        b.borrower_sqid = d.borrower_cqid();
        b.lender_slot = slot;
        b.lender_table = base;
        // Holistic load balance from the published utilizations + weights.
        QueuePair* shadow = queue(b.shadow_sqid);
        QueuePair* borrower_qp = queue(b.borrower_sqid);
        if (!shadow || !borrower_qp) continue;
        shadow->bound = true;
        shadow->bound_borrower = b.borrower;
        const auto rr = compute_redirect_ratio(
            std::max<std::uint32_t>(1, d.borrower_utilization()),
            std::max<std::uint32_t>(1, d.lender_utilization()),
            borrower_qp->weight, active_weight_sum(b.borrower), shadow->weight,
            active_weight_sum(b.lender));
        b.p_redirect = rr.probability;
        // Staleness: both ends rewrite the utilization field once per
        // window; the older of the two stamps gates redirection.
        b.last_amount = d.amount;
        b.utils_updated = std::min(plat_.ssd(b.lender).last_util_write(),
                                   plat_.ssd(b.borrower).last_util_write());
        fresh.push_back(b);
      }
    }
    // Unbind shadow QPs that no longer appear.
    for (const auto& old : bindings_) {
      bool still = false;
      for (const auto& b : fresh)
        if (b.shadow_sqid == old.shadow_sqid && b.borrower == old.borrower)
          still = true;
      if (!still) {
        if (QueuePair* qp = queue(old.shadow_sqid); qp && qp->sq.empty())
          qp->bound = false;
      }
    }
    bindings_ = std::move(fresh);
  }
  if (cfg_.variant == Variant::Vh || cfg_.variant == Variant::VhIdeal) vh_tick();
}

// ---------------- VH baseline ----------------

void HostDriver::vh_tick() {
  // Burst detection: proc-or-flash above the watermark for 2 consecutive
  // windows forms a group; both below for 2 windows reclaims it.
  for (int d = 0; d < cfg_.ssd_count; ++d) {
    SsdDevice& dev = plat_.ssd(d);
    if (dev.failed()) continue;
    const auto s = dev.last_sample();
    const bool busy = s.processor > cfg_.harvest.watermark ||
                      s.flash > cfg_.harvest.watermark;
    auto git = vh_groups_.find(d);
    if (git != vh_groups_.end()) {
      VhGroup& g = git->second;
      if (!busy) {
        if (++g.below >= 2 && !g.reclaiming) {
          if (cfg_.variant == Variant::Vh) {
            g.reclaiming = true;
            log_event("vh.reclaim_start",
                      "borrower=" + std::to_string(d) + " extents=" +
                          std::to_string(g.extents.size()));
            vh_reclaim_pump(g);
          }
        }
      } else {
        g.below = 0;
      }
      continue;
    }
    if (!busy) {
      vh_above_.erase(d);
      continue;
    }
    if (++vh_above_[d] < 2) continue;
    // Pick one idle lender not already in a group.
    for (int l = 0; l < cfg_.ssd_count; ++l) {
      if (l == d || plat_.ssd(l).failed()) continue;
      const auto ls = plat_.ssd(l).last_sample();
      if (ls.processor > cfg_.harvest.watermark || ls.flash > cfg_.harvest.watermark)
        continue;
      bool taken = false;
      for (const auto& [bid, g] : vh_groups_) {
        if (bid == static_cast<std::uint32_t>(l)) taken = true;
        for (const auto lender : g.lenders)
          if (lender == static_cast<std::uint32_t>(l)) taken = true;
      }
      if (taken) continue;
      VhGroup g;
      g.borrower = static_cast<std::uint32_t>(d);
      g.lenders.push_back(static_cast<std::uint32_t>(l));
      vh_groups_.emplace(d, std::move(g));
      log_event("vh.group", "borrower=" + std::to_string(d) +
                                " lender=" + std::to_string(l));
      break;
    }
  }
}

std::uint32_t HostDriver::vh_route(NvmeCommand& cmd, VhGroup& g) {
  const Lpn first = cmd.offset / kSlice;
  const std::int64_t slices = (cmd.size + kSlice - 1) / kSlice;
  if (cmd.is_write) {
    if (g.reclaiming) {
      // New writes land on the borrower; their extents are gone.
      for (std::int64_t s = 0; s < slices; ++s) g.extents.erase(first + s);
      return g.borrower;
    }
    // Spread across members round-robin.
    const std::size_t member = g.rr++ % (g.lenders.size() + 1);
    if (member == g.lenders.size()) {
      for (std::int64_t s = 0; s < slices; ++s) g.extents.erase(first + s);
      return g.borrower;
    }
    const std::uint32_t lender = g.lenders[member];
    for (std::int64_t s = 0; s < slices; ++s) g.extents[first + s] = lender;
    return lender;
  }
  // Reads follow the data, including extents in mid-copy.
  if (auto it = g.extents.find(first); it != g.extents.end()) return it->second;
  if (auto it = g.copying.find(first); it != g.copying.end()) return it->second;
  return g.borrower;
}

void HostDriver::vh_reclaim_pump(VhGroup& g) {
  if (!g.reclaiming) return;
  while (g.reclaim_inflight < 8) {
    if (g.extents.empty()) {
      if (g.reclaim_inflight == 0) {
        g.reclaiming = false;
        log_event("vh.reclaim_done", "borrower=" + std::to_string(g.borrower));
        vh_groups_.erase(g.borrower);
      }
      return;
    }
    // Coalesce a contiguous run held by one lender into a single copy.
    auto it = g.extents.begin();
    const Lpn first = it->first;
    const std::uint32_t holder = it->second;
    Lpn last = first;
    while (it != g.extents.end() && it->first == last &&
           it->second == holder && last - first < 16) {
      g.copying.emplace(it->first, holder);
      it = g.extents.erase(it);
      ++last;
    }
    auto rd = std::make_unique<NvmeCommand>();
    rd->owner = g.borrower;  // logical identity stays with the borrower
    rd->route_ssd = holder;
    rd->is_write = false;
    rd->offset = first * kSlice;
    rd->size = (last - first) * kSlice;
    rd->created = plat_.now();
    rd->workload_slot = -2;
    ++g.reclaim_inflight;
    submit_io(std::move(rd));
  }
}

}  // namespace xbofsim
