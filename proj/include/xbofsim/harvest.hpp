#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "xbofsim/descriptor.hpp"
#include "xbofsim/fabric.hpp"
#include "xbofsim/mrc.hpp"

namespace xbofsim {

enum class ProcessorAction : std::uint8_t { None, Lend, Borrow };

// Both busy -> nothing to gain; processor under the watermark -> lend it;
// processor busy with flash headroom -> borrow more.
ProcessorAction decide_processor_action(double processor_busy, double flash_busy,
                                        double watermark = 0.75);

struct RedirectRatio {
  double ratio;        // N_borrow / N_lend
  double probability;  // chance a command is sent to the shadow SQ
};

// Load-balance split between a borrower queue and the bound shadow queue.
// Utilizations in basis points (0..10000); weights are WRR weights.
RedirectRatio compute_redirect_ratio(std::uint32_t u_borrow_bp,
                                     std::uint32_t u_lend_bp,
                                     double w_borrow_sq, double sum_w_borrow,
                                     double w_shadow_sq, double sum_w_lend);

struct DramDecision {
  enum class Kind : std::uint8_t { None, Lend, Borrow } kind = Kind::None;
  int segments = 0;
};

struct DramPolicy {
  double threshold = 0.10;       // target miss ratio
  double epsilon = 0.005;        // lend tail: improvement per segment below this
  std::uint64_t min_samples = 256;
  int borrow_cap_segments = 64;  // per decision
};

// current/total in segments. Borrow enough to reach the threshold; lend the
// tail of the curve where extra segments stop paying.
DramDecision decide_dram_action(const MrcEstimate& mrc, int current_segments,
                                int total_segments, const DramPolicy& policy = {});

// One SSD's idle-resource table living in fabric memory: fixed slots of 16
// bytes. Claiming CASes the first descriptor word (borrower_id 0xFF -> id).
class DescriptorTable {
 public:
  static constexpr int kSlots = 8;

  DescriptorTable(CxlFabric& fabric, std::uint32_t owner);

  std::uint64_t base() const { return base_; }
  std::uint64_t slot_addr(int slot) const {
    return base_ + static_cast<std::uint64_t>(slot) * IdleResourceDescriptor::kBytes;
  }

  // Lender side: writes a fresh valid descriptor. Returns the slot, or
  // nullopt if every slot holds a valid claimed descriptor (publish deferred).
  std::optional<int> publish(const IdleResourceDescriptor& d);
  void invalidate(int slot);
  void rewrite(int slot, const IdleResourceDescriptor& d);
  IdleResourceDescriptor read_local(int slot) const;

  // Borrower side, remote: snapshot of another table.
  static std::vector<IdleResourceDescriptor> read_all(
      CxlFabric& fabric, std::uint32_t reader, std::uint64_t table_base,
      Nanos* fabric_ns = nullptr);
  // CAS claim of `slot`. Returns true when this reader won the descriptor.
  static bool claim(CxlFabric& fabric, std::uint32_t reader,
                    std::uint64_t table_base, int slot,
                    const IdleResourceDescriptor& expected,
                    std::uint8_t borrower_id);
  // Release borrower_id back to 0xFF (by the borrower).
  static void release(CxlFabric& fabric, std::uint32_t reader,
                      std::uint64_t table_base, int slot);

 private:
  CxlFabric& fabric_;
  std::uint32_t owner_;
  std::uint64_t base_;
};

}  // namespace xbofsim
