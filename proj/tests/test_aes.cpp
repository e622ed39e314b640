#include <array>

#include "doctest.h"
#include "snapsafe/aes.hpp"
#include "snapsafe/bytes.hpp"

using namespace snapsafe;

namespace {

Bytes unhex(const char* hex) {
  auto r = hex_decode(hex);
  REQUIRE(r.ok());
  return r.value();
}

template <typename Cipher>
std::string encrypt_hex(const char* key_hex, const char* block_hex) {
  const Bytes key = unhex(key_hex);
  const Bytes in = unhex(block_hex);
  REQUIRE(key.size() == Cipher::kKeyLen);
  REQUIRE(in.size() == 16);
  Cipher cipher{std::span<const std::uint8_t, Cipher::kKeyLen>(key.data(),
                                                               Cipher::kKeyLen)};
  std::uint8_t out[16];
  cipher.encrypt_block(in.data(), out);
  return hex_encode(std::span<const std::uint8_t>(out, 16));
}

}  // namespace

// FIPS-197 Appendix C.1: AES-128 single-block known answer.
TEST_CASE("AES-128 FIPS-197 C.1 vector") {
  CHECK(encrypt_hex<Aes128>("000102030405060708090a0b0c0d0e0f",
                            "00112233445566778899aabbccddeeff") ==
        "69c4e0d86a7b0430d8cdb78070b4c55a");
}

// FIPS-197 Appendix C.3: AES-256 single-block known answer.
TEST_CASE("AES-256 FIPS-197 C.3 vector") {
  CHECK(encrypt_hex<Aes256>(
            "000102030405060708090a0b0c0d0e0f101112131415161718191a1b1c1d1e1f",
            "00112233445566778899aabbccddeeff") ==
        "8ea2b7ca516745bfeafc49904b496089");
}

// SP 800-38A F.1.1: ECB-AES128 first two blocks.
TEST_CASE("AES-128 SP 800-38A F.1.1 blocks") {
  CHECK(encrypt_hex<Aes128>("2b7e151628aed2a6abf7158809cf4f3c",
                            "6bc1bee22e409f96e93d7e117393172a") ==
        "3ad77bb40d7a3660a89ecaf32466ef97");
  CHECK(encrypt_hex<Aes128>("2b7e151628aed2a6abf7158809cf4f3c",
                            "ae2d8a571e03ac9c9eb76fac45af8e51") ==
        "f5d3d58503b9699de785895a96fdbaaf");
}

// SP 800-38A F.1.5: ECB-AES256 first two blocks.
TEST_CASE("AES-256 SP 800-38A F.1.5 blocks") {
  const char* key =
      "603deb1015ca71be2b73aef0857d77811f352c073b6108d72d9810a30914dff4";
  CHECK(encrypt_hex<Aes256>(key, "6bc1bee22e409f96e93d7e117393172a") ==
        "f3eed1bdb5d2a03c064b5a7e3db181f8");
  CHECK(encrypt_hex<Aes256>(key, "ae2d8a571e03ac9c9eb76fac45af8e51") ==
        "591ccb10d410ed26dc5ba74a31362870");
}

TEST_CASE("AES key schedule is stable across calls") {
  const Bytes key = unhex("2b7e151628aed2a6abf7158809cf4f3c");
  Aes128 cipher{std::span<const std::uint8_t, 16>(key.data(), 16)};
  const Bytes in = unhex("6bc1bee22e409f96e93d7e117393172a");
  std::uint8_t out1[16];
  std::uint8_t out2[16];
  cipher.encrypt_block(in.data(), out1);
  cipher.encrypt_block(in.data(), out2);
  CHECK(std::equal(out1, out1 + 16, out2));
}
