#include "xbofsim/descriptor.hpp"

#include <stdexcept>

namespace xbofsim {

namespace {

void put_u64_le(std::uint8_t* out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out[i] = static_cast<std::uint8_t>(v >> (8 * i));
}

std::uint64_t get_u64_le(const std::uint8_t* in) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(in[i]) << (8 * i);
  return v;
}

}  // namespace

std::array<std::uint8_t, IdleResourceDescriptor::kBytes>
IdleResourceDescriptor::encode() const {
  const std::uint64_t word0 =
      (valid ? 1ULL : 0ULL) |
      (static_cast<std::uint64_t>(type) << 1) |
      (static_cast<std::uint64_t>(borrower_id) << 2) |
      (static_cast<std::uint64_t>(amount) << 10) |
      ((info & 0x3FFFFF) << 42);
  const std::uint64_t word1 = info >> 22;  // upper 42 bits; 22 reserved zero
  std::array<std::uint8_t, kBytes> out{};
  put_u64_le(out.data(), word0);
  put_u64_le(out.data() + 8, word1);
  return out;
}

IdleResourceDescriptor IdleResourceDescriptor::decode(
    std::span<const std::uint8_t> bytes) {
  if (bytes.size() != kBytes)
    throw std::invalid_argument("descriptor: expected 16 bytes");
  const std::uint64_t word0 = get_u64_le(bytes.data());
  const std::uint64_t word1 = get_u64_le(bytes.data() + 8);
  IdleResourceDescriptor d;
  d.valid = (word0 & 1) != 0;
  d.type = static_cast<ResourceType>((word0 >> 1) & 1);
  d.borrower_id = static_cast<std::uint8_t>((word0 >> 2) & 0xFF);
  d.amount = static_cast<std::uint32_t>((word0 >> 10) & 0xFFFFFFFF);
  d.info = ((word0 >> 42) & 0x3FFFFF) | ((word1 & 0x3FFFFFFFFFFULL) << 22);
  return d;
}

}  // namespace xbofsim
