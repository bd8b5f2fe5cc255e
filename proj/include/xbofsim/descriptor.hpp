#pragma once

#include <array>
#include <cstdint>
#include <span>

namespace xbofsim {

enum class ResourceType : std::uint8_t { Processor = 0, Dram = 1 };

// 128-bit idle-resource descriptor, serialized little-endian as two 64-bit
// words. Bit layout (LSB first):
//   word0: valid(1) | type(1) | borrower_id(8) | amount(32) | info[0:22)
//   word1: info[22:64) | reserved(22, zero)
// amount, processor kind: borrower utilization (low 16) ++ lender utilization
// (high 16), both in basis points. amount, DRAM kind: lendable capacity in MB.
// info, processor kind: mapping directory address (low 32) ++ borrower CQID
// (16) ++ shadow CQID (16). info, DRAM kind: segment list header address
// (low 32) ++ log page base address (high 32).
struct IdleResourceDescriptor {
  static constexpr std::uint8_t kUnclaimed = 0xFF;
  static constexpr std::size_t kBytes = 16;

  bool valid = false;
  ResourceType type = ResourceType::Processor;
  std::uint8_t borrower_id = kUnclaimed;
  std::uint32_t amount = 0;
  std::uint64_t info = 0;

  std::array<std::uint8_t, kBytes> encode() const;
  static IdleResourceDescriptor decode(std::span<const std::uint8_t> bytes);

  // amount accessors (processor kind)
  std::uint16_t borrower_utilization() const { return amount & 0xFFFF; }
  std::uint16_t lender_utilization() const { return amount >> 16; }
  void set_utilizations(std::uint16_t borrower_bp, std::uint16_t lender_bp) {
    amount = static_cast<std::uint32_t>(borrower_bp) |
             (static_cast<std::uint32_t>(lender_bp) << 16);
  }

  // info accessors (processor kind)
  std::uint32_t mapping_directory_address() const {
    return static_cast<std::uint32_t>(info & 0xFFFFFFFF);
  }
  std::uint16_t borrower_cqid() const {
    return static_cast<std::uint16_t>((info >> 32) & 0xFFFF);
  }
  std::uint16_t shadow_cqid() const {
    return static_cast<std::uint16_t>((info >> 48) & 0xFFFF);
  }
  void set_processor_info(std::uint32_t directory_addr, std::uint16_t borrower_cq,
                          std::uint16_t shadow_cq) {
    info = static_cast<std::uint64_t>(directory_addr) |
           (static_cast<std::uint64_t>(borrower_cq) << 32) |
           (static_cast<std::uint64_t>(shadow_cq) << 48);
  }

  // info accessors (DRAM kind)
  std::uint32_t segment_list_header_address() const {
    return static_cast<std::uint32_t>(info & 0xFFFFFFFF);
  }
  std::uint32_t log_page_base_address() const {
    return static_cast<std::uint32_t>(info >> 32);
  }
  void set_dram_info(std::uint32_t segment_list_addr, std::uint32_t log_base) {
    info = static_cast<std::uint64_t>(segment_list_addr) |
           (static_cast<std::uint64_t>(log_base) << 32);
  }

  bool unclaimed() const { return borrower_id == kUnclaimed; }

  bool operator==(const IdleResourceDescriptor&) const = default;
};

}  // namespace xbofsim
