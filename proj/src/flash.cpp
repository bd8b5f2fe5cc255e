#include "xbofsim/flash.hpp"

#include <algorithm>

namespace xbofsim {

void FlashGeometry::validate() const {
  if (channels < 1 || dies_per_channel < 1 || planes_per_die < 1 ||
      blocks_per_plane < 1 || pages_per_block < 1 || page_size < 1 ||
      channel_mt_per_s < 1)
    throw std::invalid_argument("flash geometry: all counts must be >= 1");
}

void FlashTiming::validate() const {
  for (int i = 0; i < 3; ++i) {
    if (!(read_ns[i] < program_ns[i] && program_ns[i] < erase_ns))
      throw std::invalid_argument("flash timing: need read < program < erase");
  }
}

FlashBackbone::FlashBackbone(FlashGeometry geometry, FlashTiming timing)
    : geometry_(geometry), timing_(timing) {
  geometry_.validate();
  timing_.validate();
  dies_.resize(geometry_.dies_total());
  channel_free_.assign(geometry_.channels, 0);
}

void FlashBackbone::check_address(const FlashAddress& a) const {
  if (a.channel < 0 || a.channel >= geometry_.channels || a.die < 0 ||
      a.die >= geometry_.dies_per_channel || a.plane < 0 ||
      a.plane >= geometry_.planes_per_die || a.block < 0 ||
      a.block >= geometry_.blocks_per_plane || a.page < 0 ||
      a.page >= geometry_.pages_per_block)
    throw FlashFault("flash: address out of range");
}

void FlashBackbone::note_erased(const FlashAddress& a) {
  check_address(a);
  auto it = programmed_.find(block_key(a));
  if (it != programmed_.end()) it->second.assign(geometry_.pages_per_block, false);
}

FlashOpResult FlashBackbone::submit(FlashOpKind kind, const FlashAddress& addr,
                                    Nanos earliest) {
  check_address(addr);
  ++ops_submitted_;
  DieState& die = dies_[die_index(addr)];
  const PageType pt = page_type_of(addr.page);
  FlashOpResult r{};

  if (kind == FlashOpKind::Erase) {
    const Nanos start = std::max(earliest, die.free_at);
    r.start = start;
    r.cell_start = start;
    r.cell_end = start + timing_.erase_ns;
    r.complete = r.cell_end;
    die.free_at = r.cell_end;
    die.busy.emplace_back(r.cell_start, r.cell_end);
    die.group_page = -1;
    busy_ns_[2] += timing_.erase_ns;
    auto& bits = programmed_[block_key(addr)];
    bits.assign(geometry_.pages_per_block, false);
    return r;
  }

  const Nanos cell_time = (kind == FlashOpKind::Read)
                              ? timing_.read_ns[static_cast<int>(pt)]
                              : timing_.program_ns[static_cast<int>(pt)];
  const Nanos xfer = geometry_.page_transfer_ns();
  Nanos& ch_free = channel_free_[addr.channel];

  if (kind == FlashOpKind::Program) {
    auto& bits = programmed_[block_key(addr)];
    if (bits.empty()) bits.assign(geometry_.pages_per_block, false);
    if (bits[addr.page])
      throw FlashFault("flash: program to non-erased page (write in place)");
    bits[addr.page] = true;
  }

  // Multi-plane join: same kind and page offset, a different plane, issued
  // at the same instant, before the shared cell window starts.
  const std::uint32_t plane_bit = 1u << addr.plane;
  const bool joinable =
      die.group_page == addr.page && die.group_kind == kind &&
      (die.group_planes & plane_bit) == 0 &&
      die.group_issued == earliest && die.group_cell_start >= earliest;

  if (kind == FlashOpKind::Read) {
    if (joinable) {
      r.cell_start = die.group_cell_start;
      r.cell_end = die.group_cell_end;
      r.start = r.cell_start;
      die.group_planes |= plane_bit;
    } else {
      r.start = std::max(earliest, die.free_at);
      r.cell_start = r.start;
      r.cell_end = r.cell_start + cell_time;
      die.free_at = r.cell_end;
      die.busy.emplace_back(r.cell_start, r.cell_end);
      busy_ns_[0] += cell_time;
      die.group_kind = kind;
      die.group_page = addr.page;
      die.group_cell_start = r.cell_start;
      die.group_cell_end = r.cell_end;
      die.group_issued = earliest;
      die.group_planes = plane_bit;
    }
    const Nanos tx_start = std::max(r.cell_end, ch_free);
    ch_free = tx_start + xfer;
    r.complete = tx_start + xfer;
    transferred_bytes_ += geometry_.page_size;
    return r;
  }

  // Program: data moves over the channel first, then the cell programs.
  const Nanos tx_start = std::max(earliest, ch_free);
  ch_free = tx_start + xfer;
  const Nanos data_ready = tx_start + xfer;
  transferred_bytes_ += geometry_.page_size;

  if (joinable && die.group_cell_start >= data_ready) {
    r.start = tx_start;
    r.cell_start = die.group_cell_start;
    r.cell_end = die.group_cell_end;
    die.group_planes |= plane_bit;
  } else {
    r.start = tx_start;
    r.cell_start = std::max(data_ready, die.free_at);
    r.cell_end = r.cell_start + cell_time;
    die.free_at = r.cell_end;
    die.busy.emplace_back(r.cell_start, r.cell_end);
    busy_ns_[1] += cell_time;
    die.group_kind = kind;
    die.group_page = addr.page;
    die.group_cell_start = r.cell_start;
    die.group_cell_end = r.cell_end;
    die.group_issued = earliest;
    die.group_planes = plane_bit;
  }
  r.complete = r.cell_end;
  return r;
}

double FlashBackbone::utilization_window(Nanos begin, Nanos end) const {
  if (end <= begin) throw std::invalid_argument("utilization_window: empty window");
  if (begin < prune_horizon_)
    throw std::invalid_argument("utilization_window: window already pruned");
  std::int64_t busy = 0;
  for (const DieState& die : dies_) {
    for (const auto& [s, e] : die.busy) {
      const Nanos lo = std::max(s, begin);
      const Nanos hi = std::min(e, end);
      if (hi > lo) busy += hi - lo;
    }
  }
  const double denom =
      static_cast<double>(end - begin) * static_cast<double>(dies_.size());
  return static_cast<double>(busy) / denom;
}

void FlashBackbone::prune(Nanos t) {
  prune_horizon_ = std::max(prune_horizon_, t);
  for (DieState& die : dies_) {
    while (!die.busy.empty() && die.busy.front().second <= t) die.busy.pop_front();
  }
}

}  // namespace xbofsim
