#include "xbofsim/ssd.hpp"

#include <algorithm>
#include <cstring>
#include <limits>
#include <sstream>

#include "xbofsim/host.hpp"
#include "xbofsim/redo_log.hpp"

namespace xbofsim {

namespace {
constexpr std::int64_t kSlice = 4096;
constexpr std::int64_t kEntriesPerMapPage = 4096;
constexpr std::int64_t kSqeBytes = 64;
constexpr std::int64_t kCqeBytes = 16;
}  // namespace

SsdDevice::SsdDevice(std::uint32_t id, Platform& platform, DeviceMetrics& metrics)
    : id_(id),
      plat_(platform),
      metrics_(metrics),
      cfg_(*platform.config),
      hw_(platform.config->ssd),
      read_pipe_(hw_.read_ceiling_bps),
      write_pipe_(hw_.write_ceiling_bps),
      agent_cost_(hw_.agent_dequeue_tenths_ns),
      table_(*platform.fabric, id),
      log_commit_cost_(hw_.log_commit_tenths_ns),
      shards_(platform.config->harvest.shards_rate) {
  flash_ = std::make_unique<FlashBackbone>(hw_.geometry, hw_.timing);

  if (cfg_.variant == Variant::Oc) {
    compute_ = plat_.host_compute;
  } else {
    own_compute_ = std::make_unique<ComputeComplex>(
        cfg_.effective_core_count(), hw_.core_mhz, cfg_.window);
    compute_ = own_compute_.get();
  }

  const auto& g = hw_.geometry;
  const std::int64_t total_blocks = g.blocks_total();
  const std::int64_t pages_per_block = g.pages_per_block;
  user_planes_ = g.dies_total() * g.planes_per_die;

  // Mapping sizing: logical space is the overprovision-reduced share of the
  // user blocks (meta ring carved out first).
  const std::int64_t naive_map_pages =
      (g.pages_total() * (g.page_size / kSlice) * 4 + g.page_size - 1) / g.page_size;
  std::int64_t meta_blocks_total =
      std::max<std::int64_t>(4, (naive_map_pages * 3 + pages_per_block - 1) / pages_per_block);
  meta_blocks_total = std::min(meta_blocks_total, total_blocks / 4);
  managed_blocks_ = total_blocks - meta_blocks_total;
  const std::int64_t user_slots =
      managed_blocks_ * pages_per_block * (g.page_size / kSlice);
  logical_pages_ = static_cast<std::int64_t>(
      static_cast<double>(user_slots) * (1.0 - hw_.overprovision));
  map_pages_ = (logical_pages_ * 4 + g.page_size - 1) / g.page_size;

  entries_.assign(logical_pages_, kUnmappedEntry);
  flashed_entries_.assign(logical_pages_, kUnmappedEntry);

  const int pages_per_segment =
      static_cast<int>(std::max<std::int64_t>(1, hw_.segment_bytes / g.page_size));
  std::int64_t dram = cfg_.dram_bytes();
  if (cfg_.variant == Variant::Oc) dram = cfg_.host.dram_bytes / cfg_.ssd_count;
  int local_segments = static_cast<int>(
      std::max<std::int64_t>(1, dram / hw_.segment_bytes));
  const std::int64_t regions =
      (map_pages_ + pages_per_segment - 1) / pages_per_segment;
  local_segments = static_cast<int>(
      std::min<std::int64_t>(local_segments, std::max<std::int64_t>(1, regions)));
  cache_ = std::make_unique<MappingCache>(map_pages_, pages_per_segment,
                                          local_segments);
  if (cfg_.prewarm_mapping) cache_->prewarm();

  // Block pools. The meta ring takes the tail blocks of the last planes.
  valid_count_.assign(total_blocks, 0);
  slot_lpns_.resize(total_blocks);
  free_blocks_.resize(user_planes_);
  std::int64_t claimed_meta = 0;
  for (std::int64_t b = total_blocks - 1; b >= 0 && claimed_meta < meta_blocks_total; --b) {
    meta_blocks_.push_back(b);
    ++claimed_meta;
  }
  std::sort(meta_blocks_.begin(), meta_blocks_.end());
  std::int64_t meta_from = meta_blocks_.empty() ? total_blocks : meta_blocks_.front();
  for (std::int64_t b = 0; b < meta_from; ++b) {
    const int plane_group = static_cast<int>(b / g.blocks_per_plane);
    free_blocks_[plane_group].push_back(static_cast<int>(b % g.blocks_per_plane));
  }
  // Pop order: lowest block first.
  for (auto& list : free_blocks_) std::reverse(list.begin(), list.end());
  free_block_count_ = meta_from;
  user_open_.assign(user_planes_, OpenBlock{});
  gc_open_.assign(user_planes_, OpenBlock{});

  meta_live_.assign(meta_blocks_.size(), 0);
  meta_slot_page_.assign(meta_blocks_.size() * pages_per_block, -1);
  meta_loc_.assign(map_pages_, -1);
  // Initial on-flash image of the table occupies the first meta blocks.
  for (std::int64_t p = 0; p < map_pages_; ++p) {
    meta_loc_[p] = p;
    meta_slot_page_[p] = p;
    meta_live_[p / pages_per_block]++;
  }
  const std::int64_t image_blocks =
      (map_pages_ + pages_per_block - 1) / pages_per_block;
  meta_cursor_block_ = -1;
  meta_cursor_page_ = pages_per_block;
  for (std::int64_t b = image_blocks;
       b < static_cast<std::int64_t>(meta_blocks_.size()); ++b)
    meta_free_.push_back(b);

  // Fabric-visible bodies: mapping directory, lendable segments, log pages.
  directory_region_ = plat_.fabric->register_region(
      id_, std::max<std::int64_t>(64, regions * 8), RegionKind::DescriptorTable);
  segment_region_base_ = plat_.fabric->register_region(
      id_, std::max<std::int64_t>(hw_.segment_bytes, local_segments * hw_.segment_bytes),
      RegionKind::LendableSegment);
  segment_list_region_ = plat_.fabric->register_region(
      id_, 64 + 4 * std::max<std::int64_t>(1, local_segments), RegionKind::MessageQueue);
  log_region_base_ = plat_.fabric->register_region(
      id_, std::max<std::int64_t>(1, regions) * 4096, RegionKind::LogPage);

  if (cfg_.preload_data) preload_sequential();
}

// Factory image: the logical space arrives fully mapped with a sequential
// layout, so read workloads touch flash from the first command.
void SsdDevice::preload_sequential() {
  const int slices_per_page = static_cast<int>(hw_.geometry.page_size / kSlice);
  for (Lpn lpn = 0; lpn < logical_pages_; lpn += slices_per_page) {
    const auto page = allocate_page(false);
    if (!page) break;
    auto& lpns = slot_lpns_[*page / hw_.geometry.pages_per_block];
    const int page_in_block =
        static_cast<int>(*page % hw_.geometry.pages_per_block);
    for (int s = 0; s < slices_per_page && lpn + s < logical_pages_; ++s) {
      entries_[lpn + s] = pack_ppn(*page, s);
      lpns[page_in_block * 4 + s] = static_cast<std::uint32_t>(lpn + s);
      valid_count_[*page / hw_.geometry.pages_per_block]++;
    }
  }
  flashed_entries_ = entries_;
}

std::int64_t SsdDevice::global_block(int die, int plane, int block) const {
  return (static_cast<std::int64_t>(die) * hw_.geometry.planes_per_die + plane) *
             hw_.geometry.blocks_per_plane +
         block;
}

std::int64_t SsdDevice::flash_page_index(int die, int plane, int block,
                                         int page) const {
  return global_block(die, plane, block) * hw_.geometry.pages_per_block + page;
}

FlashAddress SsdDevice::address_of_page(std::int64_t flash_page) const {
  const auto& g = hw_.geometry;
  FlashAddress a;
  a.page = static_cast<int>(flash_page % g.pages_per_block);
  std::int64_t block = flash_page / g.pages_per_block;
  a.block = static_cast<int>(block % g.blocks_per_plane);
  std::int64_t plane_group = block / g.blocks_per_plane;
  a.plane = static_cast<int>(plane_group % g.planes_per_die);
  const int die_linear = static_cast<int>(plane_group / g.planes_per_die);
  a.channel = die_linear / g.dies_per_channel;
  a.die = die_linear % g.dies_per_channel;
  return a;
}

// plane_group is (die_linear * planes + plane); allocation walks channels
// first so consecutive pages land on distinct dies.
std::optional<std::int64_t> SsdDevice::allocate_page(bool for_gc) {
  auto& cursor = for_gc ? gc_cursor_ : user_cursor_;
  auto& open = for_gc ? gc_open_ : user_open_;
  const auto& g = hw_.geometry;
  const int slots = user_planes_;
  // User writes never drain the pool completely; GC keeps a reserve so it
  // can always make forward progress.
  const std::int64_t reserve = std::max<std::int64_t>(2, user_planes_ / 4);
  if (!for_gc && free_block_count_ <= reserve) return std::nullopt;
  for (int attempt = 0; attempt < slots; ++attempt) {
    const std::size_t raw = cursor++ % slots;
    // raw -> channel-major die order, plane outermost.
    const int channel = static_cast<int>(raw % g.channels);
    const int die_in_ch = static_cast<int>((raw / g.channels) % g.dies_per_channel);
    const int plane = static_cast<int>(raw / (g.channels * g.dies_per_channel));
    const int die_linear = channel * g.dies_per_channel + die_in_ch;
    const int group = die_linear * g.planes_per_die + plane;
    OpenBlock& ob = open[group];
    if (ob.block < 0 || ob.next_page >= g.pages_per_block) {
      if (free_blocks_[group].empty()) continue;
      ob.block = free_blocks_[group].back();
      free_blocks_[group].pop_back();
      --free_block_count_;
      ob.next_page = 0;
      auto& lp = slot_lpns_[global_block(die_linear, plane, ob.block)];
      lp.assign(static_cast<std::size_t>(g.pages_per_block) * 4, kUnmappedEntry);
    }
    const int page = ob.next_page++;
    return flash_page_index(die_linear, plane, ob.block, page);
  }
  return std::nullopt;  // no free block anywhere
}

std::uint64_t SsdDevice::token_at(std::uint32_t entry) const {
  if (entry == kUnmappedEntry) return 0;
  const std::int64_t slot = static_cast<std::int64_t>(ppn_page(entry)) * 4 + ppn_slot(entry);
  const auto it = flash_tokens_.find(slot);
  return it == flash_tokens_.end() ? 0 : it->second;
}

void SsdDevice::attach_queue(QueuePair* qp) { queues_.push_back(qp); }

void SsdDevice::doorbell() {
  if (failed_) return;
  fetch_pump();
}

QueuePair* SsdDevice::wrr_fetch() {
  if (queues_.empty()) return nullptr;
  const std::size_t n = queues_.size();
  for (std::size_t step = 0; step < 2 * n; ++step) {
    QueuePair* qp = queues_[wrr_index_ % n];
    const bool usable = !qp->sq.empty() &&
                        (qp->role == QueueRole::Normal || qp->bound);
    if (usable && wrr_credit_ < qp->weight) {
      ++wrr_credit_;
      return qp;
    }
    // Exhausted credit or empty queue: move on.
    wrr_index_ = (wrr_index_ + 1) % n;
    wrr_credit_ = 0;
  }
  return nullptr;
}

void SsdDevice::fetch_pump() {
  if (failed_) return;
  while (active_jobs_ < compute_->cores() * 2) {
    QueuePair* qp = wrr_fetch();
    if (!qp) return;
    const std::uint64_t id = qp->sq.front();
    qp->sq.pop_front();
    NvmeCommand* cmd = plat_.host->command(id);
    plat_.host->pump_host_pending(qp->ssd);
    ++active_jobs_;
    start_fetch(cmd);
  }
}

void SsdDevice::start_fetch(NvmeCommand* cmd) {
  SsdDevice* owner = &plat_.ssd(cmd->route_ssd);
  CmdExec ex;
  ex.cmd = cmd;
  ex.owner = owner;
  ex.first_lpn = cmd->offset / kSlice;
  ex.slices = static_cast<int>((cmd->offset + cmd->size + kSlice - 1) / kSlice -
                               ex.first_lpn);
  ex.read_tokens.assign(cmd->is_write ? 0 : ex.slices, 0);
  cmd->exec_ssd = id_;
  // SQE fetch crosses this device's link (small fixed-latency transfer).
  const Nanos done = plat_.now() + plat_.fabric->config().one_way_latency +
                     transfer_ns(kSqeBytes, plat_.fabric->config().per_device_bandwidth);
  plat_.fabric->account_bytes(id_, kSqeBytes);
  cmd->charge(Bucket::HostSsd, plat_.now(), done);
  ex.ready = done;
  const std::uint64_t id = cmd->id;
  inflight_.emplace(id, std::move(ex));
  plat_.engine->schedule(done - plat_.now(), ssd_actor(id_), "translate",
                         [this, id] { translate_step(id); });
}

bool SsdDevice::locks_enabled() const {
  return cfg_.variant == Variant::ProcH || cfg_.variant == Variant::Xbof;
}

void SsdDevice::release_locks(CmdExec& ex) { ex.locked_regions.clear(); }

Nanos SsdDevice::run_cache_actions(
    const std::vector<MappingCache::Action>& actions, NvmeCommand* cmd,
    Nanos at) {
  Nanos stall = 0;
  SsdDevice* owner = this;  // actions always run against the owner's state
  for (const auto& a : actions) {
    switch (a.kind) {
      case MappingCache::Action::Kind::FillPage:
        // Charged by the caller via read_mapping_page.
        break;
      case MappingCache::Action::Kind::DemoteSegment: {
        // Copy present pages into a free segment frame at the chosen lender.
        OffsiteSlot* slot = nullptr;
        for (auto& cand : owner->offsite_slots_) {
          if (cand.lender == a.lender && cand.region < 0) {
            slot = &cand;
            break;
          }
        }
        if (slot) {
          // Updates made while the segment was local exist only in DRAM.
          // Persist them first: the on-flash image is the recovery base the
          // redo log replays over.
          const auto dirty = owner->cache_->dirty_pages(a.region);
          if (!dirty.empty()) owner->flush_mapping_pages(a.region, dirty, at);
          slot->region = a.region;
          RedoLogPage::format(
              {plat_.fabric->mem(slot->log_addr, 4096), 4096},
              static_cast<std::uint32_t>(a.region), slot->next_seq);
          slot->log_fill = 0;
          const std::int64_t bytes =
              static_cast<std::int64_t>(a.pages.size()) * hw_.geometry.page_size;
          if (bytes > 0) {
            // Entries become fabric-resident at the lender.
            const std::int64_t per_seg =
                owner->cache_->pages_per_segment() * kEntriesPerMapPage;
            const std::int64_t first = a.region * per_seg;
            const std::int64_t count =
                std::min<std::int64_t>(per_seg, owner->logical_pages_ - first);
            if (count > 0) {
              std::uint8_t* dst = plat_.fabric->mem(slot->seg_addr, count * 4);
              std::memcpy(dst, owner->entries_.data() + first, count * 4);
            }
            plat_.fabric->reserve_link(slot->lender, bytes, at);
          }
          plat_.host->log_event("dram.demote",
                                "ssd=" + std::to_string(owner->id()) +
                                    " region=" + std::to_string(a.region) +
                                    " lender=" + std::to_string(slot->lender));
        }
        break;
      }
      case MappingCache::Action::Kind::FlushSegment:
        owner->flush_mapping_pages(a.region, a.pages, at);
        if (a.from == SegmentLocation::Offsite) {
          if (auto* slot = owner->offsite_slot_of(a.region); slot) {
            slot->region = -1;
          } else {
            for (auto& s : owner->offsite_slots_)
              if (s.region == a.region) s.region = -1;
          }
        }
        break;
      case MappingCache::Action::Kind::DropSegment:
        if (a.from == SegmentLocation::Offsite) {
          for (auto& s : owner->offsite_slots_)
            if (s.region == a.region) s.region = -1;
        }
        break;
    }
  }
  (void)cmd;
  return stall;
}

Nanos SsdDevice::read_mapping_page(std::int64_t map_page, Nanos at,
                                   NvmeCommand* cmd) {
  // Owner-side flash read of one 16 KB mapping page.
  const std::int64_t slot = meta_loc_[map_page];
  const std::int64_t block_idx = slot / hw_.geometry.pages_per_block;
  const std::int64_t gb = meta_blocks_[block_idx];
  const std::int64_t flash_page =
      gb * hw_.geometry.pages_per_block + slot % hw_.geometry.pages_per_block;
  const auto addr = address_of_page(flash_page);
  const auto r = flash_->submit(FlashOpKind::Read, addr, at);
  if (flash_op_hook) flash_op_hook(FlashOpKind::Read, addr, cmd);
  metrics_.add_dram_bytes(hw_.geometry.page_size);
  dram_bytes_ += hw_.geometry.page_size;
  return r.complete;
}

// Append one mapping page image into the meta area. Relocations reuse this
// path, so it never touches flashed_entries_ (the image content is whatever
// the caller already persisted for that page).
void SsdDevice::meta_append(std::int64_t map_page, Nanos at, int depth) {
  const auto& g = hw_.geometry;
  if (depth > 64) throw std::logic_error("meta area: compaction did not converge");
  if (meta_cursor_page_ >= g.pages_per_block || meta_cursor_block_ < 0) {
    if (meta_free_.empty()) meta_compact(at, depth + 1);
    meta_cursor_block_ = meta_free_.front();
    meta_free_.pop_front();
    meta_cursor_page_ = 0;
  }
  const std::int64_t slot =
      meta_cursor_block_ * g.pages_per_block + meta_cursor_page_++;
  const std::int64_t old = meta_loc_[map_page];
  if (old >= 0 && meta_slot_page_[old] == map_page) {
    meta_slot_page_[old] = -1;
    meta_live_[old / g.pages_per_block]--;
  }
  meta_loc_[map_page] = slot;
  meta_slot_page_[slot] = map_page;
  meta_live_[slot / g.pages_per_block]++;
  const std::int64_t gb = meta_blocks_[slot / g.pages_per_block];
  const std::int64_t flash_page = gb * g.pages_per_block + slot % g.pages_per_block;
  flash_->submit(FlashOpKind::Program, address_of_page(flash_page), at);
  metrics_.add_dram_bytes(g.page_size);
  dram_bytes_ += g.page_size;
}

void SsdDevice::meta_compact(Nanos at, int depth) {
  const auto& g = hw_.geometry;
  // Greedy victim among closed meta blocks; moving its live pages frees it.
  std::int64_t victim = -1;
  std::int64_t best = g.pages_per_block;
  for (std::size_t b = 0; b < meta_blocks_.size(); ++b) {
    if (static_cast<std::int64_t>(b) == meta_cursor_block_) continue;
    if (meta_live_[b] < best) {
      best = meta_live_[b];
      victim = static_cast<std::int64_t>(b);
    }
  }
  if (victim < 0) throw std::logic_error("meta area: no compaction victim");
  std::vector<std::int64_t> live;
  for (int p = 0; p < g.pages_per_block; ++p) {
    const std::int64_t s = victim * g.pages_per_block + p;
    if (meta_slot_page_[s] >= 0) live.push_back(meta_slot_page_[s]);
  }
  for (const auto mp : live) {
    flash_->submit(FlashOpKind::Read,
                   address_of_page(meta_blocks_[victim] * g.pages_per_block +
                                   meta_loc_[mp] % g.pages_per_block),
                   at);
    meta_append(mp, at, depth);
  }
  flash_->submit(FlashOpKind::Erase,
                 address_of_page(meta_blocks_[victim] * g.pages_per_block), at);
  for (int p = 0; p < g.pages_per_block; ++p)
    meta_slot_page_[victim * g.pages_per_block + p] = -1;
  meta_live_[victim] = 0;
  meta_free_.push_back(victim);
}

void SsdDevice::flush_mapping_pages(std::int64_t region,
                                    const std::vector<int>& pages, Nanos at) {
  for (const int page_in_seg : pages) {
    const std::int64_t map_page =
        region * cache_->pages_per_segment() + page_in_seg;
    if (map_page >= map_pages_) continue;
    // Persisted image catches up with the live entries for this page.
    const std::int64_t first = map_page * kEntriesPerMapPage;
    const std::int64_t count =
        std::min<std::int64_t>(kEntriesPerMapPage, logical_pages_ - first);
    if (count > 0)
      std::copy(entries_.begin() + first, entries_.begin() + first + count,
                flashed_entries_.begin() + first);
    meta_append(map_page, at, 0);
  }
  cache_->clear_dirty(region);
}

void SsdDevice::translate_step(std::uint64_t cmd_id) {
  auto it = inflight_.find(cmd_id);
  if (it == inflight_.end() || failed_) return;
  CmdExec& ex = it->second;
  NvmeCommand* cmd = ex.cmd;
  SsdDevice* owner = ex.owner;

  if (ex.first_lpn < 0 || ex.first_lpn + ex.slices > owner->logical_pages_) {
    cmd->error = true;
    completion_stage(cmd_id);
    return;
  }
  if (owner->device_full_ && cmd->is_write) {
    cmd->error = true;
    completion_stage(cmd_id);
    return;
  }

  const bool remote = owner->id() != id_;
  // One firmware chunk per dispatch: the core reservation happens at event
  // time, so service stations never book fragmented future slots.
  {
    Nanos cursor = std::max(plat_.now(), ex.ready);
    std::int64_t cycles = 0;
    if (ex.first_chunk) {
      cycles += hw_.firmware.fetch_parse;
      ex.first_chunk = false;
    }
    Nanos mmio_ns = 0;  // OC: the host core pushes each wrapped op over the link
    Nanos dram_stall = 0;
    Nanos fabric_stall = 0;
    Nanos fill_done = -1;
    int in_chunk = 0;
    while (ex.next_slice < ex.slices && in_chunk < hw_.firmware_chunk_slices) {
      const Lpn lpn = ex.first_lpn + ex.next_slice;
      const std::int64_t map_page = lpn / kEntriesPerMapPage;
      const std::int64_t region = map_page / owner->cache_->pages_per_segment();
      if (locks_enabled() &&
          std::find(ex.locked_regions.begin(), ex.locked_regions.end(), region) ==
              ex.locked_regions.end()) {
        // One rw-lock acquisition per command per region; sections are
        // atomic within a dispatch, so the cost model is sync cycles plus a
        // fabric round trip for remote holders.
        ex.locked_regions.push_back(region);
        cycles += hw_.firmware.sync;
        if (remote) fabric_stall += plat_.fabric->config().round_trip();
      }
      cycles += hw_.firmware.translate + hw_.firmware.dma_issue;
      if (cfg_.variant == Variant::Oc) mmio_ns += cfg_.host.oc_op_issue_ns;
      // Resolve the slice.
      const auto buf = owner->buffer_map_.find(lpn);
      if (!cmd->is_write && buf != owner->buffer_map_.end()) {
        dram_stall += hw_.dram_access_ns;
        ex.read_tokens[ex.next_slice] = buf->second.token;
      } else {
        if (cfg_.variant == Variant::Xbof) owner->shards_.access(region);
        auto outcome = owner->cache_->access(map_page, false);
        if (outcome.page_fill) ++owner->window_misses_;
        else ++owner->window_hits_;
        run_cache_actions(outcome.actions, cmd, cursor);
        if (outcome.page_fill) {
          fill_done = owner->read_mapping_page(map_page, cursor, cmd);
        } else if (outcome.where == SegmentLocation::Offsite) {
          auto* slot = owner->offsite_slot_of(region);
          if (slot && slot->region == region) {
            const std::int64_t per_seg =
                owner->cache_->pages_per_segment() * kEntriesPerMapPage;
            const std::int64_t entry_off = lpn - region * per_seg;
            std::uint8_t tmp[4];
            const auto acc =
                plat_.fabric->read(id_, slot->seg_addr + entry_off * 4, tmp);
            fabric_stall += acc.fabric_ns;
          } else {
            fabric_stall += plat_.fabric->config().round_trip();
          }
        } else {
          dram_stall += hw_.dram_access_ns;
        }
        owner->metrics_.add_dram_bytes(4);
        owner->dram_bytes_ += 4;
        if (!cmd->is_write) {
          const std::uint32_t entry = owner->entries_[lpn];
          ex.read_tokens[ex.next_slice] = owner->token_at(entry);
          if (entry != kUnmappedEntry)
            ex.pages[ppn_page(entry)].push_back(ex.next_slice);
        }
      }
      ++ex.next_slice;
      ++in_chunk;
      if (fill_done >= 0) break;
    }
    const Nanos cyc_ns = compute_->cycles_to_ns(cycles) + mmio_ns;
    const auto resv = compute_->reserve(cyc_ns + dram_stall + fabric_stall, cursor);
    cmd->charge(Bucket::Processor, resv.start, resv.start + cyc_ns);
    cmd->charge(Bucket::Dram, resv.start + cyc_ns, resv.start + cyc_ns + dram_stall);
    cmd->charge(Bucket::InterSsd, resv.start + cyc_ns + dram_stall, resv.end);
    ex.ready = resv.end;
    if (fill_done >= 0) {
      const Nanos resume = std::max(fill_done, ex.ready);
      cmd->charge(Bucket::Flash, ex.ready, resume);
      ex.ready = resume;
      plat_.engine->schedule(resume - plat_.now(), ssd_actor(id_), "translate_resume",
                             [this, cmd_id] { translate_step(cmd_id); });
      return;
    }
    if (ex.next_slice < ex.slices) {
      plat_.engine->schedule(ex.ready - plat_.now(), ssd_actor(id_),
                             "translate_chunk",
                             [this, cmd_id] { translate_step(cmd_id); });
      return;
    }
  }
  finish_translate(ex);
}

void SsdDevice::finish_translate(CmdExec& ex) {
  NvmeCommand* cmd = ex.cmd;
  release_locks(ex);
  if (!ex.job_released) {
    ex.job_released = true;
    --active_jobs_;
    fetch_pump();
  }
  if (cmd->is_write) {
    start_write_dma(ex);
    return;
  }
  const std::uint64_t id = cmd->id;
  plat_.engine->schedule(std::max<Nanos>(0, ex.ready - plat_.now()),
                         ssd_actor(id_), "issue_reads", [this, id] {
                           auto it = inflight_.find(id);
                           if (it == inflight_.end() || failed_) return;
                           CmdExec& e = it->second;
                           const auto ops =
                               static_cast<std::int64_t>(e.pages.size());
                           if (ops > 0) {
                             Nanos extra =
                                 cfg_.variant == Variant::Oc
                                     ? static_cast<Nanos>(ops) *
                                           cfg_.host.oc_op_issue_ns
                                     : 0;
                             const auto resv = compute_->reserve(
                                 compute_->cycles_to_ns(hw_.firmware.flash_issue *
                                                        ops) +
                                     extra,
                                 plat_.now());
                             e.cmd->charge(Bucket::Processor, resv.start, resv.end);
                             e.ready = resv.end;
                           }
                           issue_reads(e);
                         });
}

void SsdDevice::issue_reads(CmdExec& ex) {
  NvmeCommand* cmd = ex.cmd;
  SsdDevice* owner = ex.owner;
  const bool remote = owner->id() != id_;
  if (ex.pages.empty()) {
    // Pure zero-fill read: deliver straight from the compute-end.
    completion_stage(cmd->id);
    return;
  }
  ex.pages_pending = static_cast<int>(ex.pages.size());
  const std::uint64_t id = cmd->id;
  for (const auto& [page, slices] : ex.pages) {
    Nanos start = std::max(ex.ready, plat_.now());
    if (remote) {
      // Wrapped op: fabric hop into the borrower's message queue, then the
      // data-end agent dequeues and unwraps.
      const Nanos arrive = start + plat_.fabric->config().one_way_latency +
                           plat_.fabric->config().flit_serialization();
      plat_.fabric->account_bytes(owner->id(), plat_.fabric->config().flit_bytes);
      const Nanos unwrapped = owner->agent_admit(arrive);
      cmd->charge(Bucket::InterSsd, start, unwrapped);
      start = unwrapped;
    }
    const auto addr = owner->address_of_page(page);
    const auto r = owner->flash_->submit(FlashOpKind::Read, addr, start);
    if (owner->flash_op_hook) owner->flash_op_hook(FlashOpKind::Read, addr, cmd);
    owner->served_any_ = true;
    const std::int64_t pg = page;
    plat_.engine->schedule(r.complete - plat_.now(), ssd_actor(owner->id()),
                           "page_read_done",
                           [this, id, pg] { page_read_done(id, pg); });
  }
}

void SsdDevice::page_read_done(std::uint64_t cmd_id, std::int64_t flash_page) {
  auto it = inflight_.find(cmd_id);
  if (it == inflight_.end() || failed_) return;
  CmdExec& ex = it->second;
  NvmeCommand* cmd = ex.cmd;
  SsdDevice* owner = ex.owner;
  cmd->charge(Bucket::Flash, ex.ready, plat_.now());
  const auto slices = ex.pages.at(flash_page);
  const std::int64_t bytes = static_cast<std::int64_t>(slices.size()) * kSlice;
  // Data moves flash -> device DRAM -> host; the read pipe is the binding
  // resource (device ceiling below the link rate).
  const Nanos pipe_done = owner->read_pipe_.reserve(bytes, plat_.now());
  const Nanos link_done = pipe_done + plat_.fabric->config().one_way_latency;
  plat_.fabric->account_bytes(owner->id(), bytes);
  owner->metrics_.add_dram_bytes(2 * bytes);
  owner->dram_bytes_ += 2 * bytes;
  cmd->charge(Bucket::HostSsd, plat_.now(), link_done);
  if (--ex.pages_pending == 0) {
    ex.ready = link_done;
    const std::uint64_t id = cmd_id;
    plat_.engine->schedule(link_done - plat_.now(), ssd_actor(id_), "read_complete",
                           [this, id] { completion_stage(id); });
  }
}

void SsdDevice::start_write_dma(CmdExec& ex) {
  const std::uint64_t id = ex.cmd->id;
  plat_.engine->schedule(
      std::max<Nanos>(0, ex.ready - plat_.now()), ssd_actor(ex.owner->id()),
      "write_dma_start", [this, id] {
        auto it = inflight_.find(id);
        if (it == inflight_.end() || failed_) return;
        CmdExec& ex2 = it->second;
        NvmeCommand* cmd = ex2.cmd;
        SsdDevice* owner = ex2.owner;
        const Nanos pipe_done = owner->write_pipe_.reserve(cmd->size, plat_.now());
        const Nanos link_done = pipe_done + plat_.fabric->config().one_way_latency;
        plat_.fabric->account_bytes(owner->id(), cmd->size);
        owner->metrics_.add_dram_bytes(2 * cmd->size);
        owner->dram_bytes_ += 2 * cmd->size;
        cmd->charge(Bucket::HostSsd, ex2.ready, link_done);
        ex2.ready = link_done;
        plat_.engine->schedule(link_done - plat_.now(), ssd_actor(owner->id()),
                               "write_dma_done", [this, id] { buffer_admit(id); });
      });
}

void SsdDevice::buffer_admit(std::uint64_t cmd_id) {
  auto it = inflight_.find(cmd_id);
  if (it == inflight_.end() || failed_) return;
  CmdExec& ex = it->second;
  NvmeCommand* cmd = ex.cmd;
  SsdDevice* owner = ex.owner;
  const std::int64_t need = static_cast<std::int64_t>(ex.slices) * kSlice;
  if (owner->device_full_) {
    cmd->error = true;
    completion_stage(cmd_id);
    return;
  }
  if (owner->buffer_used_ + need > hw_.write_buffer_bytes) {
    owner->admission_waiters_.push_back(cmd_id);
    return;  // resumed when programs drain the buffer
  }
  for (int i = 0; i < ex.slices; ++i) {
    const std::uint64_t token =
        static_cast<std::size_t>(i) < cmd->vh_tokens.size()
            ? cmd->vh_tokens[i]
            : cmd->write_token + i;
    owner->accept_slice(ex.first_lpn + i, token);
  }
  ex.ready = std::max(ex.ready, plat_.now());
  completion_stage(cmd_id);
}

void SsdDevice::accept_slice(Lpn lpn, std::uint64_t token) {
  buffer_used_ += kSlice;
  const std::uint64_t version = ++buffer_version_;
  buffer_map_[lpn] = {token, version};
  pending_slices_.push_back({lpn, token, version});
  served_any_ = true;
  if (static_cast<std::int64_t>(pending_slices_.size()) >=
      hw_.geometry.page_size / kSlice) {
    form_program(false);
  } else {
    arm_flush_timer();
  }
}

void SsdDevice::arm_flush_timer() {
  if (flush_timer_) plat_.engine->cancel(*flush_timer_);
  flush_timer_ = plat_.engine->schedule(
      hw_.write_flush_timeout, ssd_actor(id_), "write_flush_timer", [this] {
        flush_timer_.reset();
        if (!pending_slices_.empty()) form_program(true);
      });
}

void SsdDevice::form_program(bool padded) {
  const int per_page = static_cast<int>(hw_.geometry.page_size / kSlice);
  while (!pending_slices_.empty() &&
         (padded || static_cast<int>(pending_slices_.size()) >= per_page)) {
    const int take = std::min<int>(per_page, static_cast<int>(pending_slices_.size()));
    const auto page = allocate_page(false);
    if (!page) {
      // Out of erased blocks: park the slices and let GC free space. The
      // erase completion retries program formation.
      maybe_start_gc();
      return;
    }
    std::vector<PendingSlice> batch(pending_slices_.begin(),
                                    pending_slices_.begin() + take);
    pending_slices_.erase(pending_slices_.begin(),
                          pending_slices_.begin() + take);
    // Firmware issues the program op.
    const auto resv = compute_->reserve(
        compute_->cycles_to_ns(hw_.firmware.flash_issue), plat_.now());
    const auto addr = address_of_page(*page);
    const auto r = flash_->submit(FlashOpKind::Program, addr, resv.end);
    if (flash_op_hook) flash_op_hook(FlashOpKind::Program, addr, nullptr);
    metrics_.add_physical_write(hw_.geometry.page_size);
    const std::int64_t fp = *page;
    plat_.engine->schedule(r.complete - plat_.now(), ssd_actor(id_), "program_done",
                           [this, fp, batch = std::move(batch)] {
                             apply_program(fp, batch);
                           });
    if (padded) break;  // flush one partial page at a time
  }
  if (!pending_slices_.empty()) arm_flush_timer();
}

void SsdDevice::apply_program(std::int64_t flash_page,
                              std::vector<PendingSlice> slices) {
  if (failed_) return;
  auto& lpns = slot_lpns_[flash_page / hw_.geometry.pages_per_block];
  const int page_in_block =
      static_cast<int>(flash_page % hw_.geometry.pages_per_block);
  int slot = 0;
  for (const auto& s : slices) {
    // Programs can finish out of order; only the newest version of an LPN
    // may land in the map.
    metrics_.add_user_programmed(kSlice);
    auto& applied = applied_version_[s.lpn];
    if (s.version > applied) {
      applied = s.version;
      const std::uint32_t new_entry = pack_ppn(flash_page, slot);
      flash_tokens_[flash_page * 4 + slot] = s.token;
      lpns[page_in_block * 4 + slot] = static_cast<std::uint32_t>(s.lpn);
      valid_count_[flash_page / hw_.geometry.pages_per_block]++;
      apply_mapping_update(s.lpn, new_entry);
    }
    // Retire the buffer copy if this was the latest write to the lpn.
    auto it = buffer_map_.find(s.lpn);
    if (it != buffer_map_.end() && it->second.version == s.version)
      buffer_map_.erase(it);
    buffer_used_ -= kSlice;
    ++slot;
  }
  // Unblock waiting writers.
  while (!admission_waiters_.empty()) {
    const std::uint64_t cmd_id = admission_waiters_.front();
    auto it = inflight_.find(cmd_id);
    if (it == inflight_.end()) {
      admission_waiters_.pop_front();
      continue;
    }
    const std::int64_t need = static_cast<std::int64_t>(it->second.slices) * kSlice;
    if (buffer_used_ + need > hw_.write_buffer_bytes) break;
    admission_waiters_.pop_front();
    buffer_admit(cmd_id);
  }
  maybe_start_gc();
}

void SsdDevice::invalidate_slot(std::uint32_t entry) {
  if (entry == kUnmappedEntry) return;
  const std::int64_t flash_page = ppn_page(entry);
  const std::int64_t block = flash_page / hw_.geometry.pages_per_block;
  valid_count_[block]--;
  auto& lpns = slot_lpns_[block];
  if (!lpns.empty()) {
    const int page_in_block =
        static_cast<int>(flash_page % hw_.geometry.pages_per_block);
    lpns[page_in_block * 4 + ppn_slot(entry)] = kUnmappedEntry;
  }
  flash_tokens_.erase(flash_page * 4 + ppn_slot(entry));
}

void SsdDevice::apply_mapping_update(Lpn lpn, std::uint32_t new_entry) {
  const std::int64_t map_page = lpn / kEntriesPerMapPage;
  const std::int64_t region = map_page / cache_->pages_per_segment();
  const std::uint32_t old = entries_[lpn];
  if (old != kUnmappedEntry) invalidate_slot(old);
  entries_[lpn] = new_entry;
  auto outcome = cache_->access(map_page, true);
  if (outcome.page_fill) ++window_misses_;
  else ++window_hits_;
  if (cfg_.variant == Variant::Xbof) shards_.access(region);
  run_cache_actions(outcome.actions, nullptr, plat_.now());
  if (outcome.page_fill) read_mapping_page(map_page, plat_.now(), nullptr);
  if (outcome.where == SegmentLocation::Offsite) {
    if (auto* slot = offsite_slot_of(region); slot) {
      offsite_write(*slot, lpn, new_entry, plat_.now());
    }
  }
  metrics_.add_dram_bytes(4);
  dram_bytes_ += 4;
}

SsdDevice::OffsiteSlot* SsdDevice::offsite_slot_of(std::int64_t region) {
  for (auto& s : offsite_slots_) {
    if (s.region == region) return &s;
  }
  // Unassigned region: hand out the first free slot (demotion path).
  for (auto& s : offsite_slots_) {
    if (s.region < 0) return &s;
  }
  return nullptr;
}

void SsdDevice::offsite_write(OffsiteSlot& slot, Lpn lpn, std::uint32_t value,
                              Nanos at) {
  const std::int64_t per_seg = cache_->pages_per_segment() * kEntriesPerMapPage;
  const std::int64_t entry_off = lpn - slot.region * per_seg;
  // Update the entry in lender DRAM.
  std::uint8_t bytes[4];
  std::memcpy(bytes, &value, 4);
  plat_.fabric->write(id_, slot.seg_addr + entry_off * 4, bytes);
  // Commit the redo record to the borrower-resident log page before ack.
  RedoRecord rec;
  rec.entry_offset = static_cast<std::uint32_t>(entry_off);
  rec.value = value;
  rec.sequence = slot.next_seq++;
  RedoLogPage::append({plat_.fabric->mem(slot.log_addr, 4096), 4096},
                      static_cast<std::size_t>(slot.log_fill), rec);
  ++slot.log_fill;
  (void)at;
  Nanos cost = log_commit_cost_.take();
  compute_->reserve(cost, at);  // the committing end burns the commit time
  if (slot.log_fill >= static_cast<int>(RedoLogPage::kCapacity)) {
    flush_offsite_segment(slot, at);
  }
}

void SsdDevice::flush_offsite_segment(OffsiteSlot& slot, Nanos at) {
  if (slot.region < 0) return;
  const auto dirty = cache_->dirty_pages(slot.region);
  flush_mapping_pages(slot.region, dirty, at);
  RedoLogPage::format({plat_.fabric->mem(slot.log_addr, 4096), 4096},
                      static_cast<std::uint32_t>(slot.region), slot.next_seq);
  slot.log_fill = 0;
  plat_.host->log_event("dram.segment_flush",
                        "ssd=" + std::to_string(id_) +
                            " region=" + std::to_string(slot.region));
}

void SsdDevice::completion_stage(std::uint64_t cmd_id) {
  auto it = inflight_.find(cmd_id);
  if (it == inflight_.end() || failed_) return;
  CmdExec& ex = it->second;
  NvmeCommand* cmd = ex.cmd;
  const auto resv = compute_->reserve(
      compute_->cycles_to_ns(hw_.firmware.completion), std::max(ex.ready, plat_.now()));
  cmd->charge(Bucket::Processor, resv.start, resv.end);
  // CQ entry + MSI-X over this device's link (fixed-latency control write).
  const Nanos cq_done =
      resv.end + plat_.fabric->config().one_way_latency +
      transfer_ns(kCqeBytes, plat_.fabric->config().per_device_bandwidth);
  plat_.fabric->account_bytes(id_, kCqeBytes);
  cmd->charge(Bucket::HostSsd, resv.end, cq_done);
  auto tokens = std::move(ex.read_tokens);
  finish_command(cmd_id);
  const std::uint64_t id = cmd->id;
  plat_.engine->schedule(cq_done - plat_.now(), kHostActor, "cq_delivery",
                         [this, id, cq_done, tokens = std::move(tokens)]() mutable {
                           plat_.host->complete_command(id, cq_done, std::move(tokens));
                         });
}

void SsdDevice::finish_command(std::uint64_t cmd_id) {
  auto it = inflight_.find(cmd_id);
  if (it != inflight_.end()) {
    if (!it->second.job_released) {
      --active_jobs_;
    }
    inflight_.erase(it);
  }
  fetch_pump();
}

// ---------------- GC ----------------

void SsdDevice::maybe_start_gc() {
  if (gc_active_ || failed_) return;
  const double frac = static_cast<double>(free_block_count_) /
                      static_cast<double>(managed_blocks_);
  if (frac >= hw_.gc_low_watermark) return;
  gc_active_ = true;
  plat_.engine->schedule(0, ssd_actor(id_), "gc_start", [this] { gc_step(); });
}

// Runs up to four victim pipelines concurrently; each victim streams its
// valid pages through read -> program -> remap, then erases.
void SsdDevice::gc_step() {
  if (failed_) return;
  constexpr int kParallelVictims = 4;
  while (gc_victims_inflight_ < kParallelVictims) {
    const double frac = static_cast<double>(free_block_count_) /
                        static_cast<double>(managed_blocks_);
    if (frac >= hw_.gc_high_watermark) {
      if (gc_victims_inflight_ == 0) gc_active_ = false;
      return;
    }
    const auto& g = hw_.geometry;
    std::int64_t victim = -1;
    std::int32_t best = std::numeric_limits<std::int32_t>::max();
    std::vector<bool> open(managed_blocks_, false);
    for (int group = 0; group < user_planes_; ++group) {
      const int die = group / g.planes_per_die;
      const int plane = group % g.planes_per_die;
      if (user_open_[group].block >= 0)
        open[global_block(die, plane, user_open_[group].block)] = true;
      if (gc_open_[group].block >= 0)
        open[global_block(die, plane, gc_open_[group].block)] = true;
    }
    for (std::int64_t b = 0; b < managed_blocks_; ++b) {
      if (open[b] || slot_lpns_[b].empty() || gc_busy_blocks_.count(b)) continue;
      if (valid_count_[b] < best) {
        best = valid_count_[b];
        victim = b;
      }
    }
    if (victim < 0 || best >= g.pages_per_block * 4) {
      if (gc_victims_inflight_ == 0) {
        device_full_ = true;
        gc_active_ = false;
        plat_.host->log_event("device.full", "ssd=" + std::to_string(id_));
      }
      return;
    }
    gc_busy_blocks_.insert(victim);
    ++gc_victims_inflight_;
    gc_launch_victim(victim);
  }
}

void SsdDevice::gc_launch_victim(std::int64_t victim) {
  const auto& g = hw_.geometry;
  auto pending = std::make_shared<int>(0);
  auto& lpns = slot_lpns_[victim];
  Nanos when = plat_.now();
  for (int p = 0; p < g.pages_per_block; ++p) {
    std::vector<std::pair<Lpn, std::uint32_t>> live;  // lpn, old entry
    for (int sidx = 0; sidx < 4; ++sidx) {
      const std::uint32_t lpn = lpns[p * 4 + sidx];
      if (lpn == kUnmappedEntry) continue;
      const std::uint32_t cur = entries_[lpn];
      if (cur != kUnmappedEntry &&
          ppn_page(cur) == victim * g.pages_per_block + p &&
          ppn_slot(cur) == sidx)
        live.emplace_back(static_cast<Lpn>(lpn), cur);
    }
    if (live.empty()) continue;
    ++*pending;
    const std::int64_t src_page = victim * g.pages_per_block + p;
    const auto r =
        flash_->submit(FlashOpKind::Read, address_of_page(src_page), when);
    when = r.cell_end;  // subsequent reads queue behind on the same die
    plat_.engine->schedule(
        r.complete - plat_.now(), ssd_actor(id_), "gc_page_read",
        [this, victim, pending, live = std::move(live)] {
          gc_migrate_page(victim, pending, live);
        });
  }
  if (*pending == 0) gc_erase_victim(victim);
}

void SsdDevice::gc_migrate_page(
    std::int64_t victim, std::shared_ptr<int> pending,
    const std::vector<std::pair<Lpn, std::uint32_t>>& live) {
  if (failed_) return;
  const auto dst = allocate_page(true);
  if (!dst) {
    device_full_ = true;
    gc_active_ = false;
    return;
  }
  const auto pr =
      flash_->submit(FlashOpKind::Program, address_of_page(*dst), plat_.now());
  metrics_.add_physical_write(hw_.geometry.page_size);
  plat_.engine->schedule(
      pr.complete - plat_.now(), ssd_actor(id_), "gc_page_programmed",
      [this, victim, pending, live, dst = *dst] {
        if (failed_) return;
        auto& dst_lpns = slot_lpns_[dst / hw_.geometry.pages_per_block];
        const int dst_page =
            static_cast<int>(dst % hw_.geometry.pages_per_block);
        int migrated = 0;
        for (std::size_t sidx = 0; sidx < live.size(); ++sidx) {
          const auto [lpn, old_entry] = live[sidx];
          // Skip slots overwritten while the migration was in flight.
          if (entries_[lpn] != old_entry) continue;
          flash_tokens_[dst * 4 + static_cast<int>(sidx)] = token_at(old_entry);
          dst_lpns[dst_page * 4 + sidx] = static_cast<std::uint32_t>(lpn);
          valid_count_[dst / hw_.geometry.pages_per_block]++;
          apply_mapping_update(lpn, pack_ppn(dst, static_cast<int>(sidx)));
          ++migrated;
        }
        metrics_.add_gc_migrated_pages(migrated);
        if (--*pending == 0) gc_erase_victim(victim);
      });
}

void SsdDevice::gc_erase_victim(std::int64_t victim) {
  const auto& g = hw_.geometry;
  const auto er = flash_->submit(FlashOpKind::Erase,
                                 address_of_page(victim * g.pages_per_block),
                                 plat_.now());
  plat_.engine->schedule(er.complete - plat_.now(), ssd_actor(id_), "gc_erased",
                         [this, victim] {
                           if (failed_) return;
                           metrics_.add_gc_erase();
                           slot_lpns_[victim].clear();
                           valid_count_[victim] = 0;
                           const int group = static_cast<int>(
                               victim / hw_.geometry.blocks_per_plane);
                           free_blocks_[group].push_back(static_cast<int>(
                               victim % hw_.geometry.blocks_per_plane));
                           ++free_block_count_;
                           gc_busy_blocks_.erase(victim);
                           --gc_victims_inflight_;
                           if (static_cast<std::int64_t>(pending_slices_.size()) >=
                               hw_.geometry.page_size / 4096)
                             form_program(false);
                           gc_step();
                         });
}

// ---------------- data-end agent ----------------

Nanos SsdDevice::agent_admit(Nanos arrival) {
  while (!agent_outstanding_.empty() && agent_outstanding_.front() <= arrival)
    agent_outstanding_.pop_front();
  if (static_cast<int>(agent_outstanding_.size()) >= hw_.agent_queue_depth &&
      !agent_outstanding_.empty()) {
    arrival = agent_outstanding_.front();
    agent_outstanding_.pop_front();
  }
  const Nanos done = std::max(arrival, agent_free_) + agent_cost_.take();
  agent_free_ = done;
  agent_outstanding_.push_back(done);
  return done;
}

// ---------------- monitor + harvest ----------------

void SsdDevice::monitor_tick(std::int64_t window_idx) {
  if (failed_) return;
  window_idx_ = window_idx;
  UtilizationSample s;
  if (cfg_.variant == Variant::Oc) {
    s.processor = plat_.host_compute->window_utilization(window_idx);
  } else {
    s.processor = compute_->window_utilization(window_idx);
  }
  const Nanos wstart = window_idx * cfg_.window;
  const Nanos wend = wstart + cfg_.window;
  s.flash = flash_->utilization_window(wstart, wend);
  const std::uint64_t total = window_hits_ + window_misses_;
  s.miss_ratio = total == 0 ? 0.0
                            : static_cast<double>(window_misses_) /
                                  static_cast<double>(total);
  idle_windows_ = total == 0 ? idle_windows_ + 1 : 0;
  window_hits_ = window_misses_ = 0;
  last_sample_ = s;
  if (window_idx_ == 0) smoothed_ = s;
  smoothed_.processor = 0.5 * smoothed_.processor + 0.5 * s.processor;
  smoothed_.flash = 0.5 * smoothed_.flash + 0.5 * s.flash;
  smoothed_.miss_ratio = 0.5 * smoothed_.miss_ratio + 0.5 * s.miss_ratio;
  metrics_.record_utilization(s.processor, s.flash, s.miss_ratio);
  flash_->prune(wstart > 2 * cfg_.window ? wstart - 2 * cfg_.window : 0);

  if (cfg_.variant == Variant::ProcH || cfg_.variant == Variant::Xbof) {
    if (hw_.daemon_cycles_per_window > 0)
      compute_->reserve(compute_->cycles_to_ns(hw_.daemon_cycles_per_window),
                        plat_.now());
    harvest_tick();
    if (cfg_.variant == Variant::Xbof) dram_tick();
  }
}

void SsdDevice::harvest_tick() {
  const auto action = decide_processor_action(smoothed_.processor,
                                              smoothed_.flash,
                                              cfg_.harvest.watermark);
  // Keep published utilization fresh (lender side of each descriptor).
  if (proc_lend_slot_) {
    auto d = table_.read_local(*proc_lend_slot_);
    d.set_utilizations(d.borrower_utilization(),
                       static_cast<std::uint16_t>(smoothed_.processor * 10000));
    table_.rewrite(*proc_lend_slot_, d);
    last_util_write_ = plat_.now();
  }
  // Borrower side: refresh my utilization in each lender's descriptor and
  // drop sessions whose descriptors were invalidated.
  for (std::size_t i = 0; i < proc_sessions_.size();) {
    auto& sess = proc_sessions_[i];
    if (plat_.ssd(sess.lender).failed()) {
      ++i;  // host-driven recovery handles this path
      continue;
    }
    auto descs = DescriptorTable::read_all(*plat_.fabric, id_, sess.table_base);
    auto d = descs[sess.slot];
    if (!d.valid || d.borrower_id != id_) {
      plat_.host->log_event("proc.session_closed_by_lender",
                            "borrower=" + std::to_string(id_) +
                                " lender=" + std::to_string(sess.lender));
      proc_sessions_.erase(proc_sessions_.begin() + i);
      continue;
    }
    d.set_utilizations(static_cast<std::uint16_t>(smoothed_.processor * 10000),
                       d.lender_utilization());
    const auto bytes = d.encode();
    plat_.fabric->write(id_, sess.table_base + sess.slot * 16, bytes);
    last_util_write_ = plat_.now();
    ++i;
  }

  switch (action) {
    case ProcessorAction::Lend:
      if (!proc_sessions_.empty()) release_processor_sessions();
      if (!proc_lend_slot_) publish_processor_idle();
      break;
    case ProcessorAction::Borrow:
      if (proc_lend_slot_) {
        auto d = table_.read_local(*proc_lend_slot_);
        if (d.unclaimed()) {
          table_.invalidate(*proc_lend_slot_);
          proc_lend_slot_.reset();
        } else {
          // Someone borrows from us while we want to borrow: wind it down.
          table_.invalidate(*proc_lend_slot_);
        }
      }
      if (static_cast<int>(proc_sessions_.size()) < cfg_.harvest.borrow_cap_lenders)
        try_borrow_processor();
      break;
    case ProcessorAction::None:
      if (proc_lend_slot_) {
        auto d = table_.read_local(*proc_lend_slot_);
        table_.invalidate(*proc_lend_slot_);
        if (d.unclaimed()) proc_lend_slot_.reset();
      }
      if (!proc_sessions_.empty()) release_processor_sessions();
      break;
  }
  // Reclaim invalidated lend slots once the borrower released them.
  if (proc_lend_slot_) {
    const auto d = table_.read_local(*proc_lend_slot_);
    if (!d.valid && d.unclaimed()) proc_lend_slot_.reset();
  }
}

void SsdDevice::publish_processor_idle() {
  const std::uint16_t shadow = plat_.host->queue_free_shadow(id_);
  if (shadow == 0) return;
  IdleResourceDescriptor d;
  d.valid = true;
  d.type = ResourceType::Processor;
  d.borrower_id = IdleResourceDescriptor::kUnclaimed;
  d.set_utilizations(0, static_cast<std::uint16_t>(smoothed_.processor * 10000));
  d.set_processor_info(0, 0, shadow);
  const auto slot = table_.publish(d);
  if (slot) {
    proc_lend_slot_ = *slot;
    lend_shadow_sqid_ = shadow;
    plat_.host->log_event("proc.publish", "lender=" + std::to_string(id_));
  }
}

void SsdDevice::try_borrow_processor() {
  struct Candidate {
    std::uint16_t util;
    std::uint32_t lender;
    int slot;
    IdleResourceDescriptor d;
    std::uint64_t table_base;
  };
  std::vector<Candidate> candidates;
  for (std::uint32_t peer = 0; peer < static_cast<std::uint32_t>(cfg_.ssd_count); ++peer) {
    if (peer == id_ || plat_.ssd(peer).failed()) continue;
    const std::uint64_t base = plat_.ssd(peer).table_.base();
    const auto descs = DescriptorTable::read_all(*plat_.fabric, id_, base);
    for (int slot = 0; slot < DescriptorTable::kSlots; ++slot) {
      const auto& d = descs[slot];
      if (d.valid && d.unclaimed() && d.type == ResourceType::Processor)
        candidates.push_back({d.lender_utilization(), peer, slot, d, base});
    }
  }
  std::sort(candidates.begin(), candidates.end(), [](const auto& a, const auto& b) {
    return std::tie(a.util, a.lender, a.slot) < std::tie(b.util, b.lender, b.slot);
  });
  for (const auto& c : candidates) {
    bool duplicate = false;
    for (const auto& s : proc_sessions_)
      if (s.lender == c.lender) duplicate = true;
    if (duplicate) continue;
    if (!DescriptorTable::claim(*plat_.fabric, id_, c.table_base, c.slot, c.d, static_cast<std::uint8_t>(id_)))
      continue;
    ProcSession sess;
    sess.lender = c.lender;
    sess.slot = c.slot;
    sess.table_base = c.table_base;
    sess.shadow_sqid = c.d.shadow_cqid();
    sess.borrower_sqid = plat_.host->queue_lowest_normal(id_);
    // Fill in the borrower half of the descriptor.
    auto d = c.d;
    d.borrower_id = static_cast<std::uint8_t>(id_);
    d.set_processor_info(static_cast<std::uint32_t>(directory_region_ & 0xFFFFFFFF),
                         sess.borrower_sqid, sess.shadow_sqid);
    d.set_utilizations(static_cast<std::uint16_t>(smoothed_.processor * 10000),
                       d.lender_utilization());
    const auto bytes = d.encode();
    plat_.fabric->write(id_, c.table_base + c.slot * 16, bytes);
    proc_sessions_.push_back(sess);
    last_util_write_ = plat_.now();
    plat_.host->log_event("proc.claim", "borrower=" + std::to_string(id_) +
                                            " lender=" + std::to_string(c.lender));
    break;  // at most one new lender per window keeps claims fair
  }
}

void SsdDevice::release_processor_sessions() {
  for (const auto& sess : proc_sessions_) {
    if (!plat_.ssd(sess.lender).failed())
      DescriptorTable::release(*plat_.fabric, id_, sess.table_base, sess.slot);
    plat_.host->log_event("proc.release", "borrower=" + std::to_string(id_) +
                                              " lender=" + std::to_string(sess.lender));
  }
  proc_sessions_.clear();
}

void SsdDevice::dram_tick() {
  // Lender upkeep: reclaim segments released by the borrower.
  reclaim_released_dram();
  // Borrower upkeep: drop sessions whose lender invalidated the descriptor.
  for (std::size_t i = 0; i < dram_sessions_.size();) {
    auto& sess = dram_sessions_[i];
    if (plat_.ssd(sess.lender).failed()) {
      ++i;
      continue;
    }
    const auto descs = DescriptorTable::read_all(*plat_.fabric, id_, sess.table_base);
    if (!descs[sess.slot].valid) {
      release_dram_session(i, true);
      continue;
    }
    ++i;
  }

  const int pages_per_segment = cache_->pages_per_segment();
  const int current = cache_->local_capacity() + cache_->offsite_capacity();
  const int total = static_cast<int>(
      (map_pages_ + pages_per_segment - 1) / pages_per_segment);
  const auto mrc = shards_.estimate(total);
  DramPolicy policy = cfg_.harvest.dram;
  auto decision = decide_dram_action(mrc, current, total, policy);
  // An SSD with no mapping traffic for a few windows lends its whole cache
  // except one resident segment.
  if (decision.kind == DramDecision::Kind::None && !dram_lend_slot_ &&
      idle_windows_ >= cfg_.harvest.idle_windows_to_lend_dram &&
      cache_->local_capacity() > 1) {
    decision.kind = DramDecision::Kind::Lend;
    decision.segments = cache_->local_capacity() - 1;
  }
  switch (decision.kind) {
    case DramDecision::Kind::Borrow:
      if (dram_sessions_.size() <
          static_cast<std::size_t>(cfg_.harvest.borrow_cap_lenders))
        try_borrow_dram(decision.segments);
      break;
    case DramDecision::Kind::Lend:
      if (!dram_lend_slot_ && dram_segments_lent_ == 0) lend_dram(decision.segments);
      break;
    case DramDecision::Kind::None:
      break;
  }
}

void SsdDevice::lend_dram(int segments) {
  if (segments <= 0) return;
  segments = std::min(segments, cache_->local_capacity() - 1);
  if (segments <= 0) return;
  const auto actions = cache_->shrink_local(cache_->local_capacity() - segments);
  run_cache_actions(actions, nullptr, plat_.now());
  dram_segments_lent_ = segments;
  IdleResourceDescriptor d;
  d.valid = true;
  d.type = ResourceType::Dram;
  d.borrower_id = IdleResourceDescriptor::kUnclaimed;
  d.amount = static_cast<std::uint32_t>(
      (static_cast<std::int64_t>(segments) * hw_.segment_bytes) >> 20);
  d.set_dram_info(0, 0);  // segment window starts at slot 0 of my region
  if (d.amount == 0) {
    // Sub-MB totals cannot be advertised in the MB-granular field.
    cache_->grow_local(cache_->local_capacity() + segments);
    dram_segments_lent_ = 0;
    return;
  }
  const auto slot = table_.publish(d);
  if (slot) {
    dram_lend_slot_ = *slot;
    plat_.host->log_event("dram.publish", "lender=" + std::to_string(id_) +
                                              " segments=" + std::to_string(segments));
  } else {
    cache_->grow_local(cache_->local_capacity() + segments);
    dram_segments_lent_ = 0;
  }
}

void SsdDevice::try_borrow_dram(int want_segments) {
  if (want_segments <= 0) return;
  struct Candidate {
    std::uint32_t lender;
    int slot;
    IdleResourceDescriptor d;
    std::uint64_t table_base;
  };
  std::vector<Candidate> candidates;
  for (std::uint32_t peer = 0; peer < static_cast<std::uint32_t>(cfg_.ssd_count); ++peer) {
    if (peer == id_ || plat_.ssd(peer).failed()) continue;
    const std::uint64_t base = plat_.ssd(peer).table_.base();
    const auto descs = DescriptorTable::read_all(*plat_.fabric, id_, base);
    for (int slot = 0; slot < DescriptorTable::kSlots; ++slot) {
      const auto& d = descs[slot];
      if (d.valid && d.unclaimed() && d.type == ResourceType::Dram && d.amount > 0)
        candidates.push_back({peer, slot, d, base});
    }
  }
  std::sort(candidates.begin(), candidates.end(), [](const auto& a, const auto& b) {
    return std::tie(a.lender, a.slot) < std::tie(b.lender, b.slot);
  });
  for (const auto& c : candidates) {
    if (want_segments <= 0) break;
    bool duplicate = false;
    for (const auto& s : dram_sessions_)
      if (s.lender == c.lender) duplicate = true;
    if (duplicate) continue;
    if (!DescriptorTable::claim(*plat_.fabric, id_, c.table_base, c.slot, c.d,
                                static_cast<std::uint8_t>(id_)))
      continue;
    const std::int64_t seg_mb = hw_.segment_bytes >> 20;
    const int offered = static_cast<int>(c.d.amount / std::max<std::int64_t>(1, seg_mb));
    const int take = std::min(offered, want_segments);
    DramSession sess;
    sess.lender = c.lender;
    sess.slot = c.slot;
    sess.table_base = c.table_base;
    SsdDevice& lender = plat_.ssd(c.lender);
    for (int k = 0; k < take; ++k) {
      OffsiteSlot slot;
      slot.lender = c.lender;
      slot.lender_slot = k;
      slot.seg_addr = lender.segment_region_base_ +
                      static_cast<std::uint64_t>(k) * hw_.segment_bytes;
      const int log_idx = static_cast<int>(offsite_slots_.size());
      slot.log_addr = log_region_base_ + static_cast<std::uint64_t>(log_idx) * 4096;
      sess.slot_ids.push_back(log_idx);
      offsite_slots_.push_back(slot);
    }
    cache_->add_offsite_frames(static_cast<std::uint8_t>(c.lender), take);
    // Record the log page base in the descriptor (borrower half).
    auto d = c.d;
    d.borrower_id = static_cast<std::uint8_t>(id_);
    d.set_dram_info(d.segment_list_header_address(),
                    static_cast<std::uint32_t>(log_region_base_ & 0xFFFFFFFF));
    const auto bytes = d.encode();
    plat_.fabric->write(id_, c.table_base + c.slot * 16, bytes);
    dram_sessions_.push_back(std::move(sess));
    want_segments -= take;
    plat_.host->log_event("dram.claim", "borrower=" + std::to_string(id_) +
                                            " lender=" + std::to_string(c.lender) +
                                            " segments=" + std::to_string(take));
  }
}

void SsdDevice::release_dram_session(std::size_t idx, bool lender_alive) {
  DramSession& sess = dram_sessions_[idx];
  // Flush anything dirty cached at this lender, then drop the frames.
  for (const auto region : cache_->regions_at(static_cast<std::uint8_t>(sess.lender))) {
    for (auto& slot : offsite_slots_) {
      if (slot.region == region) flush_offsite_segment(slot, plat_.now());
    }
    const auto dirty = cache_->force_drop(region);
    if (!dirty.empty()) flush_mapping_pages(region, dirty, plat_.now());
  }
  cache_->remove_offsite_frames(static_cast<std::uint8_t>(sess.lender));
  for (auto it = offsite_slots_.begin(); it != offsite_slots_.end();) {
    if (it->lender == sess.lender) it = offsite_slots_.erase(it);
    else ++it;
  }
  if (lender_alive)
    DescriptorTable::release(*plat_.fabric, id_, sess.table_base, sess.slot);
  plat_.host->log_event("dram.release", "borrower=" + std::to_string(id_) +
                                            " lender=" + std::to_string(sess.lender));
  dram_sessions_.erase(dram_sessions_.begin() + idx);
}

void SsdDevice::reclaim_released_dram() {
  if (!dram_lend_slot_) return;
  const auto d = table_.read_local(*dram_lend_slot_);
  if (d.valid && d.unclaimed() && last_sample_.miss_ratio > cfg_.harvest.dram.threshold) {
    // Want the capacity back and nobody borrowed it.
    table_.invalidate(*dram_lend_slot_);
    cache_->grow_local(cache_->local_capacity() + dram_segments_lent_);
    dram_segments_lent_ = 0;
    dram_lend_slot_.reset();
  }
}

// ---------------- failure handling ----------------

void SsdDevice::fail_now() {
  failed_ = true;
  plat_.host->log_event("device.failed", "ssd=" + std::to_string(id_));
}

void SsdDevice::recycle_lent_resources(std::uint32_t borrower) {
  // DRAM: wipe harvested segments and reset descriptors to unclaimed.
  if (dram_lend_slot_) {
    auto d = table_.read_local(*dram_lend_slot_);
    if (d.borrower_id == borrower) {
      std::uint8_t* seg = plat_.fabric->mem(
          segment_region_base_,
          static_cast<std::uint64_t>(dram_segments_lent_) * hw_.segment_bytes);
      std::memset(seg, 0,
                  static_cast<std::size_t>(dram_segments_lent_) * hw_.segment_bytes);
      d.borrower_id = IdleResourceDescriptor::kUnclaimed;
      d.valid = true;
      table_.rewrite(*dram_lend_slot_, d);
      plat_.host->log_event("dram.recycled", "lender=" + std::to_string(id_));
    }
  }
  if (proc_lend_slot_) {
    auto d = table_.read_local(*proc_lend_slot_);
    if (d.borrower_id == borrower) {
      d.borrower_id = IdleResourceDescriptor::kUnclaimed;
      d.set_processor_info(0, 0, d.shadow_cqid());
      table_.rewrite(*proc_lend_slot_, d);
      plat_.host->log_event("proc.recycled", "lender=" + std::to_string(id_));
    }
  }
}

std::vector<std::uint32_t> SsdDevice::rebuild_region_from_logs(
    std::int64_t region) const {
  const std::int64_t per_seg = cache_->pages_per_segment() * kEntriesPerMapPage;
  const std::int64_t first = region * per_seg;
  const std::int64_t count = std::min(per_seg, logical_pages_ - first);
  std::vector<std::uint32_t> out(flashed_entries_.begin() + first,
                                 flashed_entries_.begin() + first + count);
  for (const auto& slot : offsite_slots_) {
    if (slot.region != region) continue;
    const std::uint8_t* page =
        const_cast<CxlFabric*>(plat_.fabric)->mem(slot.log_addr, 4096);
    for (const auto& rec : RedoLogPage::replay({page, 4096})) {
      if (rec.entry_offset < out.size()) out[rec.entry_offset] = rec.value;
    }
  }
  return out;
}

std::vector<std::uint32_t> SsdDevice::live_region_entries(
    std::int64_t region) const {
  const std::int64_t per_seg = cache_->pages_per_segment() * kEntriesPerMapPage;
  const std::int64_t first = region * per_seg;
  const std::int64_t count = std::min(per_seg, logical_pages_ - first);
  return std::vector<std::uint32_t>(entries_.begin() + first,
                                    entries_.begin() + first + count);
}

void SsdDevice::recover_from_lender_failure(std::uint32_t lender) {
  // Replay redo logs over the flushed images, repoint locators local.
  for (std::size_t i = 0; i < dram_sessions_.size();) {
    if (dram_sessions_[i].lender != lender) {
      ++i;
      continue;
    }
    for (const auto region : cache_->regions_at(static_cast<std::uint8_t>(lender))) {
      const auto recovered = rebuild_region_from_logs(region);
      const std::int64_t per_seg = cache_->pages_per_segment() * kEntriesPerMapPage;
      const std::int64_t first = region * per_seg;
      // The rebuilt image must equal the live truth: every acknowledged
      // update was logged before ack.
      ++recovered_regions_;
      for (const auto& slot : offsite_slots_)
        if (slot.region == region)
          recovery_log_records_ += slot.log_fill;
      for (std::size_t k = 0; k < recovered.size(); ++k) {
        if (recovered[k] != entries_[first + static_cast<std::int64_t>(k)])
          ++recovery_mismatches_;
      }
      std::copy(recovered.begin(), recovered.end(), entries_.begin() + first);
      const auto dirty = cache_->force_drop(region);
      flush_mapping_pages(region, dirty, plat_.now());
      for (auto& slot : offsite_slots_) {
        if (slot.region == region) slot.region = -1;
      }
      plat_.host->log_event("dram.recovered", "borrower=" + std::to_string(id_) +
                                                  " region=" + std::to_string(region));
    }
    cache_->remove_offsite_frames(static_cast<std::uint8_t>(lender));
    for (auto it = offsite_slots_.begin(); it != offsite_slots_.end();) {
      if (it->lender == lender) it = offsite_slots_.erase(it);
      else ++it;
    }
    dram_sessions_.erase(dram_sessions_.begin() + i);
  }
  for (std::size_t i = 0; i < proc_sessions_.size();) {
    if (proc_sessions_[i].lender == lender)
      proc_sessions_.erase(proc_sessions_.begin() + i);
    else ++i;
  }
}

std::string SsdDevice::snapshot() const {
  std::ostringstream os;
  os << "ssd " << id_ << (failed_ ? " FAILED" : "") << "\n";
  os << "  logical_pages " << logical_pages_ << " map_pages " << map_pages_
     << " free_blocks " << free_block_count_ << "/" << managed_blocks_ << "\n";
  os << "  cache local " << cache_->local_capacity() << " offsite "
     << cache_->offsite_capacity() << " hits " << cache_->hits() << " misses "
     << cache_->misses() << "\n";
  os << "  util proc " << last_sample_.processor << " flash " << last_sample_.flash
     << " miss " << last_sample_.miss_ratio << "\n";
  os << "  sessions proc " << proc_sessions_.size() << " dram "
     << dram_sessions_.size() << " lent_segments " << dram_segments_lent_ << "\n";
  return os.str();
}

}  // namespace xbofsim
