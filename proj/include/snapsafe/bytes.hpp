#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <vector>

#include "snapsafe/result.hpp"

namespace snapsafe {

using Bytes = std::vector<std::uint8_t>;
using Block16 = std::array<std::uint8_t, 16>;

std::string hex_encode(std::span<const std::uint8_t> data);
Result<Bytes> hex_decode(std::string_view hex);

inline std::uint32_t load_le32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) |
         static_cast<std::uint32_t>(p[1]) << 8 |
         static_cast<std::uint32_t>(p[2]) << 16 |
         static_cast<std::uint32_t>(p[3]) << 24;
}

inline void store_le32(std::uint8_t* p, std::uint32_t v) {
  p[0] = static_cast<std::uint8_t>(v);
  p[1] = static_cast<std::uint8_t>(v >> 8);
  p[2] = static_cast<std::uint8_t>(v >> 16);
  p[3] = static_cast<std::uint8_t>(v >> 24);
}

inline std::uint64_t load_le64(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = v << 8 | p[i];
  return v;
}

inline void store_le64(std::uint8_t* p, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) p[i] = static_cast<std::uint8_t>(v >> (8 * i));
}

// 128-bit unsigned counter, serialized big-endian (most significant byte
// first) so that lexicographic order of the serialized form matches numeric
// order.
struct U128 {
  std::uint64_t hi = 0;
  std::uint64_t lo = 0;

  void increment() {
    if (++lo == 0) ++hi;
  }

  Block16 to_bytes() const {
    Block16 out;
    const std::uint64_t h = __builtin_bswap64(hi);
    const std::uint64_t l = __builtin_bswap64(lo);
    std::memcpy(out.data(), &h, 8);
    std::memcpy(out.data() + 8, &l, 8);
    return out;
  }

  static U128 from_bytes(const Block16& in) {
    std::uint64_t h = 0;
    std::uint64_t l = 0;
    std::memcpy(&h, in.data(), 8);
    std::memcpy(&l, in.data() + 8, 8);
    return U128{__builtin_bswap64(h), __builtin_bswap64(l)};
  }

  friend bool operator==(const U128&, const U128&) = default;
};

}  // namespace snapsafe
