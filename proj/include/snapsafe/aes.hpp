#pragma once

#include <array>
#include <cstdint>
#include <span>

namespace snapsafe {

// Byte-oriented AES block encryption (FIPS-197), encrypt direction only:
// the CTR_DRBG and the deterministic simulation streams never decrypt.
// Not constant-time; this library models systems behavior and is not a
// production cryptographic provider.
class Aes128 {
 public:
  static constexpr std::size_t kKeyLen = 16;

  explicit Aes128(std::span<const std::uint8_t, kKeyLen> key);

  void encrypt_block(const std::uint8_t in[16], std::uint8_t out[16]) const;

 private:
  static constexpr int kRounds = 10;
  std::array<std::uint8_t, 16 * (kRounds + 1)> round_keys_;
};

class Aes256 {
 public:
  static constexpr std::size_t kKeyLen = 32;

  explicit Aes256(std::span<const std::uint8_t, kKeyLen> key);

  void encrypt_block(const std::uint8_t in[16], std::uint8_t out[16]) const;

 private:
  static constexpr int kRounds = 14;
  std::array<std::uint8_t, 16 * (kRounds + 1)> round_keys_;
};

}  // namespace snapsafe
