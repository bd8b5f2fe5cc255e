#include "xbofsim/fabric.hpp"

#include <cstring>
#include <stdexcept>

namespace xbofsim {

CxlFabric::CxlFabric(Engine& engine, FabricConfig cfg,
                     std::uint32_t device_count)
    : engine_(engine),
      cfg_(cfg),
      link_free_(device_count, 0),
      link_bytes_(device_count, 0) {
  if (cfg_.per_device_bandwidth <= 0 || cfg_.one_way_latency <= 0)
    throw std::invalid_argument("fabric: bandwidth and latency must be > 0");
}

std::uint64_t CxlFabric::register_region(std::uint32_t owner,
                                         std::uint64_t length,
                                         RegionKind kind) {
  GfamRegion region;
  region.owner = owner;
  region.base = next_base_;
  region.length = length;
  region.kind = kind;
  region.bytes.assign(length, 0);
  next_base_ += (length + 0xFFF) & ~std::uint64_t{0xFFF};
  regions_.push_back(std::move(region));
  by_base_[regions_.back().base] = regions_.size() - 1;
  return regions_.back().base;
}

GfamRegion& CxlFabric::locate(std::uint64_t addr, std::uint64_t len) {
  auto it = by_base_.upper_bound(addr);
  if (it == by_base_.begin()) throw std::runtime_error("fabric fault: unregistered address");
  --it;
  GfamRegion& r = regions_[it->second];
  if (addr < r.base || addr + len > r.base + r.length)
    throw std::runtime_error("fabric fault: access outside registered region");
  return r;
}

const GfamRegion& CxlFabric::region_at(std::uint64_t addr) const {
  return const_cast<CxlFabric*>(this)->locate(addr, 1);
}

std::uint8_t* CxlFabric::mem(std::uint64_t addr, std::uint64_t len) {
  GfamRegion& r = locate(addr, len);
  return r.bytes.data() + (addr - r.base);
}

Nanos CxlFabric::reserve_link(std::uint32_t device, std::int64_t bytes,
                              Nanos earliest) {
  if (device >= link_free_.size()) return earliest;  // host side: not modeled
  const Nanos start = std::max(earliest, link_free_[device]);
  const Nanos busy = transfer_ns(bytes, cfg_.per_device_bandwidth);
  link_free_[device] = start + busy;
  link_bytes_[device] += bytes;
  total_bytes_ += bytes;
  return start + busy;
}

void CxlFabric::account_bytes(std::uint32_t device, std::int64_t bytes) {
  if (device < link_bytes_.size()) link_bytes_[device] += bytes;
  total_bytes_ += bytes;
}

CxlFabric::Access CxlFabric::timed_access(std::uint32_t requester,
                                          std::uint32_t owner,
                                          std::int64_t bytes) {
  const Nanos now = engine_.now();
  if (requester == owner) return {now, 0};
  const std::int64_t flits = (bytes + cfg_.flit_bytes - 1) / cfg_.flit_bytes;
  const Nanos padded = flits * cfg_.flit_bytes;
  const Nanos done = reserve_link(owner, padded, now + cfg_.one_way_latency);
  const Nanos complete = done + cfg_.one_way_latency;
  return {complete, complete - now};
}

CxlFabric::Access CxlFabric::read(std::uint32_t requester, std::uint64_t addr,
                                  std::span<std::uint8_t> out) {
  GfamRegion& r = locate(addr, out.size());
  std::memcpy(out.data(), r.bytes.data() + (addr - r.base), out.size());
  return timed_access(requester, r.owner, static_cast<std::int64_t>(out.size()));
}

CxlFabric::Access CxlFabric::write(std::uint32_t requester, std::uint64_t addr,
                                   std::span<const std::uint8_t> data) {
  GfamRegion& r = locate(addr, data.size());
  std::memcpy(r.bytes.data() + (addr - r.base), data.data(), data.size());
  return timed_access(requester, r.owner, static_cast<std::int64_t>(data.size()));
}

CxlFabric::CasResult CxlFabric::cas64(std::uint32_t requester,
                                      std::uint64_t addr,
                                      std::uint64_t expected,
                                      std::uint64_t desired) {
  if (addr % 8 != 0) throw std::runtime_error("fabric: cas64 requires 8-byte alignment");
  GfamRegion& r = locate(addr, 8);
  std::uint64_t current = 0;
  std::memcpy(&current, r.bytes.data() + (addr - r.base), 8);
  const bool ok = current == expected;
  if (ok) std::memcpy(r.bytes.data() + (addr - r.base), &desired, 8);
  const Access a = timed_access(requester, r.owner, 8);
  return {ok, current, a.complete, a.fabric_ns};
}

void FabricRwLock::acquire(bool write, bool remote,
                           std::function<void(Nanos)> granted) {
  queue_.push_back({write, remote, std::move(granted)});
  // The request reaches the lock owner after one propagation delay.
  const Nanos arrival = remote ? one_way_ : 0;
  engine_.schedule(arrival, kFabricActor, "lock_pump", [this] { pump(); });
}

void FabricRwLock::release(bool write, bool remote) {
  const Nanos arrival = remote ? one_way_ : 0;
  engine_.schedule(arrival, kFabricActor, "lock_release", [this, write] {
    if (write) {
      if (!writer_active_) throw std::logic_error("rwlock: double write unlock");
      writer_active_ = false;
    } else {
      if (readers_active_ <= 0) throw std::logic_error("rwlock: double read unlock");
      --readers_active_;
    }
    pump();
  });
}

void FabricRwLock::pump() {
  while (!queue_.empty()) {
    Waiter& head = queue_.front();
    if (head.write) {
      if (writer_active_ || readers_active_ > 0) return;
      writer_active_ = true;
    } else {
      if (writer_active_) return;
      ++readers_active_;
    }
    auto granted = std::move(head.granted);
    const bool remote = head.remote;
    queue_.pop_front();
    const Nanos notify = remote ? one_way_ : 0;
    engine_.schedule(notify, kFabricActor, "lock_grant",
                     [granted = std::move(granted), this] { granted(engine_.now()); });
  }
}

}  // namespace xbofsim
