#include "xbofsim/harvest.hpp"

#include <algorithm>
#include <cstring>
#include <stdexcept>

namespace xbofsim {

ProcessorAction decide_processor_action(double processor_busy, double flash_busy,
                                        double watermark) {
  if (processor_busy < watermark) return ProcessorAction::Lend;
  if (flash_busy < watermark) return ProcessorAction::Borrow;
  return ProcessorAction::None;
}

RedirectRatio compute_redirect_ratio(std::uint32_t u_borrow_bp,
                                     std::uint32_t u_lend_bp,
                                     double w_borrow_sq, double sum_w_borrow,
                                     double w_shadow_sq, double sum_w_lend) {
  if (w_borrow_sq <= 0 || sum_w_borrow <= 0 || w_shadow_sq <= 0 || sum_w_lend <= 0)
    throw std::invalid_argument("redirect ratio: weights must be positive");
  if (u_borrow_bp == 0) u_borrow_bp = 1;  // division guard
  if (u_lend_bp == 0) u_lend_bp = 1;
  const double ratio = (static_cast<double>(u_lend_bp) / u_borrow_bp) *
                       (sum_w_lend / w_shadow_sq) * (w_borrow_sq / sum_w_borrow);
  return {ratio, 1.0 / (1.0 + ratio)};
}

DramDecision decide_dram_action(const MrcEstimate& mrc, int current_segments,
                                int total_segments, const DramPolicy& policy) {
  DramDecision out;
  if (mrc.samples < policy.min_samples) return out;  // cold estimate
  if (current_segments < 0 || total_segments <= 0) return out;

  if (mrc.at(current_segments) > policy.threshold) {
    // Borrow up to the smallest size meeting the threshold. When no size
    // does, extra DRAM cannot help; fall through and lend the useless tail.
    int target = -1;
    for (int c = current_segments; c <= total_segments; ++c) {
      if (mrc.at(c) <= policy.threshold) {
        target = c;
        break;
      }
    }
    if (target > current_segments) {
      out.kind = DramDecision::Kind::Borrow;
      out.segments = std::min(target - current_segments, policy.borrow_cap_segments);
      return out;
    }
    if (target >= 0) return out;  // already at the threshold
  }

  // Lend the tail: c* is the smallest size past which each extra segment
  // improves the miss ratio by less than epsilon.
  int cstar = current_segments;
  for (int c = current_segments; c >= 1; --c) {
    const double gain = mrc.at(c - 1) - mrc.at(c);
    if (gain >= policy.epsilon) {
      cstar = c;
      break;
    }
    cstar = c - 1;
  }
  cstar = std::max(cstar, 1);  // keep one segment resident
  if (current_segments > cstar) {
    out.kind = DramDecision::Kind::Lend;
    out.segments = current_segments - cstar;
  }
  return out;
}

DescriptorTable::DescriptorTable(CxlFabric& fabric, std::uint32_t owner)
    : fabric_(fabric), owner_(owner) {
  base_ = fabric_.register_region(owner, kSlots * IdleResourceDescriptor::kBytes,
                                  RegionKind::DescriptorTable);
}

IdleResourceDescriptor DescriptorTable::read_local(int slot) const {
  const std::uint8_t* p =
      fabric_.mem(slot_addr(slot), IdleResourceDescriptor::kBytes);
  return IdleResourceDescriptor::decode({p, IdleResourceDescriptor::kBytes});
}

std::optional<int> DescriptorTable::publish(const IdleResourceDescriptor& d) {
  int slot = -1;
  for (int i = 0; i < kSlots; ++i) {
    const auto cur = read_local(i);
    if (!cur.valid) {
      slot = i;
      break;
    }
  }
  if (slot < 0) return std::nullopt;  // table full of live descriptors
  rewrite(slot, d);
  return slot;
}

void DescriptorTable::rewrite(int slot, const IdleResourceDescriptor& d) {
  const auto bytes = d.encode();
  fabric_.write(owner_, slot_addr(slot), bytes);
}

void DescriptorTable::invalidate(int slot) {
  auto d = read_local(slot);
  d.valid = false;
  rewrite(slot, d);
}

std::vector<IdleResourceDescriptor> DescriptorTable::read_all(
    CxlFabric& fabric, std::uint32_t reader, std::uint64_t table_base,
    Nanos* fabric_ns) {
  std::vector<IdleResourceDescriptor> out;
  std::uint8_t buf[IdleResourceDescriptor::kBytes * kSlots];
  const auto access = fabric.read(reader, table_base, buf);
  if (fabric_ns) *fabric_ns += access.fabric_ns;
  for (int i = 0; i < kSlots; ++i) {
    out.push_back(IdleResourceDescriptor::decode(
        {buf + i * IdleResourceDescriptor::kBytes, IdleResourceDescriptor::kBytes}));
  }
  return out;
}

bool DescriptorTable::claim(CxlFabric& fabric, std::uint32_t reader,
                            std::uint64_t table_base, int slot,
                            const IdleResourceDescriptor& expected,
                            std::uint8_t borrower_id) {
  if (!expected.valid || !expected.unclaimed()) return false;
  const auto want = expected.encode();
  std::uint64_t expected_word = 0;
  std::memcpy(&expected_word, want.data(), 8);
  auto claimed = expected;
  claimed.borrower_id = borrower_id;
  const auto next = claimed.encode();
  std::uint64_t desired_word = 0;
  std::memcpy(&desired_word, next.data(), 8);
  const std::uint64_t addr =
      table_base + static_cast<std::uint64_t>(slot) * IdleResourceDescriptor::kBytes;
  return fabric.cas64(reader, addr, expected_word, desired_word).success;
}

void DescriptorTable::release(CxlFabric& fabric, std::uint32_t reader,
                              std::uint64_t table_base, int slot) {
  const std::uint64_t addr =
      table_base + static_cast<std::uint64_t>(slot) * IdleResourceDescriptor::kBytes;
  std::uint8_t buf[IdleResourceDescriptor::kBytes];
  fabric.read(reader, addr, buf);
  auto d = IdleResourceDescriptor::decode(buf);
  d.borrower_id = IdleResourceDescriptor::kUnclaimed;
  const auto bytes = d.encode();
  fabric.write(reader, addr, bytes);
}

}  // namespace xbofsim
