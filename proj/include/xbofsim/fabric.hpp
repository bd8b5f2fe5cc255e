#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "xbofsim/engine.hpp"
#include "xbofsim/time.hpp"

namespace xbofsim {

struct FabricConfig {
  std::int64_t per_device_bandwidth = 16'000'000'000;  // bytes/s per SSD link
  Nanos one_way_latency = 200;                         // round trip 400
  std::int64_t flit_bytes = 256;

  Nanos round_trip() const { return 2 * one_way_latency; }
  Nanos flit_serialization() const {
    return transfer_ns(flit_bytes, per_device_bandwidth);
  }
};

enum class RegionKind : std::uint8_t {
  DescriptorTable,
  MessageQueue,
  LendableSegment,
  LogPage,
};

struct GfamRegion {
  std::uint32_t owner;
  std::uint64_t base;
  std::uint64_t length;
  RegionKind kind;
  std::vector<std::uint8_t> bytes;
};

// Flat global coherent memory space. All accesses to an address serialize
// through the single-threaded engine, so atomicity is exact by construction;
// this class adds the timing model (per-access latency, per-link bandwidth)
// and the backing bytes.
class CxlFabric {
 public:
  CxlFabric(Engine& engine, FabricConfig cfg, std::uint32_t device_count);

  std::uint64_t register_region(std::uint32_t owner, std::uint64_t length,
                                RegionKind kind);

  struct Access {
    Nanos complete;    // when the requester sees the result
    Nanos fabric_ns;   // portion attributable to the interconnect
  };

  // Coherent read/write. Local access (requester == owner) costs nothing on
  // the fabric; callers charge their own DRAM latency.
  Access read(std::uint32_t requester, std::uint64_t addr,
              std::span<std::uint8_t> out);
  Access write(std::uint32_t requester, std::uint64_t addr,
               std::span<const std::uint8_t> data);

  struct CasResult {
    bool success;
    std::uint64_t observed;
    Nanos complete;
    Nanos fabric_ns;
  };
  // 8-byte compare-and-swap, aligned.
  CasResult cas64(std::uint32_t requester, std::uint64_t addr,
                  std::uint64_t expected, std::uint64_t desired);

  // Pure timing reservation for bulk data movement over one device link
  // (DMA traffic shares the link with fabric ops).
  Nanos reserve_link(std::uint32_t device, std::int64_t bytes, Nanos earliest);
  // Byte accounting only (control transfers modeled as fixed latency).
  void account_bytes(std::uint32_t device, std::int64_t bytes);

  // Untimed access for bookkeeping and report code.
  std::uint8_t* mem(std::uint64_t addr, std::uint64_t len);
  const GfamRegion& region_at(std::uint64_t addr) const;

  const FabricConfig& config() const { return cfg_; }
  std::int64_t link_bytes(std::uint32_t device) const {
    return link_bytes_.at(device);
  }
  // Total bytes that crossed any link (for PHY energy).
  std::int64_t total_bytes() const { return total_bytes_; }

 private:
  GfamRegion& locate(std::uint64_t addr, std::uint64_t len);
  Access timed_access(std::uint32_t requester, std::uint32_t owner,
                      std::int64_t bytes);

  Engine& engine_;
  FabricConfig cfg_;
  std::deque<GfamRegion> regions_;
  std::map<std::uint64_t, std::size_t> by_base_;
  std::uint64_t next_base_ = 0x1000;
  std::vector<Nanos> link_free_;
  std::vector<std::int64_t> link_bytes_;
  std::int64_t total_bytes_ = 0;
};

// FIFO reader-writer lock living at its owner. Remote holders pay one fabric
// round trip per acquire and per release.
class FabricRwLock {
 public:
  FabricRwLock(Engine& engine, const FabricConfig& cfg)
      : engine_(engine), rtt_(cfg.round_trip()), one_way_(cfg.one_way_latency) {}

  // `granted` runs at the time the holder learns it owns the lock.
  void acquire(bool write, bool remote, std::function<void(Nanos)> granted);
  void release(bool write, bool remote);

  bool writer_active() const { return writer_active_; }
  int readers_active() const { return readers_active_; }

 private:
  struct Waiter {
    bool write;
    bool remote;
    std::function<void(Nanos)> granted;
  };

  void pump();  // grant from the queue head, FIFO

  Engine& engine_;
  Nanos rtt_;
  Nanos one_way_;
  int readers_active_ = 0;
  bool writer_active_ = false;
  std::deque<Waiter> queue_;
};

}  // namespace xbofsim
