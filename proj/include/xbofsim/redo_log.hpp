#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace xbofsim {

// One 4 KB redo-log page protecting one harvested DRAM segment. 32-byte
// header, then 254 16-byte records. A record is {entry offset in segment
// (24 bits), new mapping value (32), sequence (64), checksum (8)}; replay
// accepts the longest prefix of records with valid checksums and contiguous
// sequences starting at the header's base sequence.
struct RedoRecord {
  std::uint32_t entry_offset = 0;  // 24 bits used
  std::uint32_t value = 0;
  std::uint64_t sequence = 0;

  void encode(std::span<std::uint8_t> out) const;  // 16 bytes
  static std::optional<RedoRecord> decode(std::span<const std::uint8_t> in);
};

class RedoLogPage {
 public:
  static constexpr std::size_t kPageBytes = 4096;
  static constexpr std::size_t kHeaderBytes = 32;
  static constexpr std::size_t kRecordBytes = 16;
  static constexpr std::size_t kCapacity =
      (kPageBytes - kHeaderBytes) / kRecordBytes;  // 254

  // Clears the page and stamps segment id + base sequence.
  static void format(std::span<std::uint8_t> page, std::uint32_t segment_id,
                     std::uint64_t base_sequence);

  // Writes record `index` (0-based). Caller tracks the fill level; appends
  // must use consecutive indices and sequences.
  static void append(std::span<std::uint8_t> page, std::size_t index,
                     const RedoRecord& record);

  static std::uint32_t segment_id(std::span<const std::uint8_t> page);
  static std::uint64_t base_sequence(std::span<const std::uint8_t> page);

  // Longest valid record prefix (checksum + contiguous sequence).
  static std::vector<RedoRecord> replay(std::span<const std::uint8_t> page);
};

}  // namespace xbofsim
