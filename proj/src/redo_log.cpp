#include "xbofsim/redo_log.hpp"

#include <cstring>
#include <stdexcept>

namespace xbofsim {

namespace {

constexpr std::uint32_t kMagic = 0x584C4F47;  // "XLOG"

std::uint8_t checksum15(const std::uint8_t* bytes) {
  std::uint8_t x = 0xA5;
  for (int i = 0; i < 15; ++i) x = static_cast<std::uint8_t>(x ^ bytes[i]);
  return x;
}

void put_u32(std::uint8_t* p, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) p[i] = static_cast<std::uint8_t>(v >> (8 * i));
}
std::uint32_t get_u32(const std::uint8_t* p) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
  return v;
}
void put_u64(std::uint8_t* p, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) p[i] = static_cast<std::uint8_t>(v >> (8 * i));
}
std::uint64_t get_u64(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}

}  // namespace

void RedoRecord::encode(std::span<std::uint8_t> out) const {
  if (out.size() < RedoLogPage::kRecordBytes)
    throw std::invalid_argument("redo record: need 16 bytes");
  out[0] = static_cast<std::uint8_t>(entry_offset);
  out[1] = static_cast<std::uint8_t>(entry_offset >> 8);
  out[2] = static_cast<std::uint8_t>(entry_offset >> 16);
  put_u32(out.data() + 3, value);
  put_u64(out.data() + 7, sequence);
  out[15] = checksum15(out.data());
}

std::optional<RedoRecord> RedoRecord::decode(
    std::span<const std::uint8_t> in) {
  if (in.size() < RedoLogPage::kRecordBytes) return std::nullopt;
  if (checksum15(in.data()) != in[15]) return std::nullopt;
  RedoRecord r;
  r.entry_offset = static_cast<std::uint32_t>(in[0]) |
                   (static_cast<std::uint32_t>(in[1]) << 8) |
                   (static_cast<std::uint32_t>(in[2]) << 16);
  r.value = get_u32(in.data() + 3);
  r.sequence = get_u64(in.data() + 7);
  return r;
}

void RedoLogPage::format(std::span<std::uint8_t> page, std::uint32_t segment_id,
                         std::uint64_t base_sequence) {
  if (page.size() < kPageBytes) throw std::invalid_argument("redo log: short page");
  std::memset(page.data(), 0, kPageBytes);
  put_u32(page.data(), kMagic);
  put_u32(page.data() + 4, segment_id);
  put_u64(page.data() + 8, base_sequence);
}

void RedoLogPage::append(std::span<std::uint8_t> page, std::size_t index,
                         const RedoRecord& record) {
  if (index >= kCapacity) throw std::out_of_range("redo log: page full");
  record.encode(page.subspan(kHeaderBytes + index * kRecordBytes, kRecordBytes));
}

std::uint32_t RedoLogPage::segment_id(std::span<const std::uint8_t> page) {
  return get_u32(page.data() + 4);
}

std::uint64_t RedoLogPage::base_sequence(std::span<const std::uint8_t> page) {
  return get_u64(page.data() + 8);
}

std::vector<RedoRecord> RedoLogPage::replay(
    std::span<const std::uint8_t> page) {
  std::vector<RedoRecord> out;
  if (page.size() < kPageBytes || get_u32(page.data()) != kMagic) return out;
  std::uint64_t expected = get_u64(page.data() + 8);
  for (std::size_t i = 0; i < kCapacity; ++i) {
    auto rec = RedoRecord::decode(
        page.subspan(kHeaderBytes + i * kRecordBytes, kRecordBytes));
    if (!rec || rec->sequence != expected) break;  // prefix semantics
    out.push_back(*rec);
    ++expected;
  }
  return out;
}

}  // namespace xbofsim
