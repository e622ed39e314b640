#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstring>
#include <span>

#include "snapsafe/aes.hpp"
#include "snapsafe/entropy.hpp"
#include "snapsafe/result.hpp"

namespace snapsafe {

// SP 800-90A 10.2.1 CTR_DRBG without derivation function and without
// prediction resistance, parameterized by block cipher. The working state
// (key, counter block V, reseed counter) is plain data so callers may place
// it in guarded memory; see DrbgState accessors.
template <typename Cipher>
class BasicCtrDrbg {
 public:
  static constexpr std::size_t kKeyLen = Cipher::kKeyLen;
  static constexpr std::size_t kBlockLen = 16;
  static constexpr std::size_t kSeedLen = kKeyLen + kBlockLen;
  // SP 800-90A Table 3 limits.
  static constexpr std::size_t kMaxBytesPerRequest = 1u << 16;  // 2^19 bits
  static constexpr std::uint64_t kDefaultReseedInterval = 1ull << 48;

  struct State {
    std::array<std::uint8_t, kKeyLen> key{};
    std::array<std::uint8_t, kBlockLen> v{};
    std::uint64_t reseed_counter = 0;
  };

  static Result<BasicCtrDrbg> instantiate(EntropySource& entropy,
                                          std::span<const std::uint8_t> personalization) {
    if (personalization.size() > kSeedLen) {
      return make_error(Errc::kPersonalizationTooLong,
                        "personalization exceeds seed length");
    }
    std::array<std::uint8_t, kSeedLen> seed_material{};
    if (auto r = entropy.fill(seed_material); !r.ok()) return r.error();
    xor_into(seed_material, personalization);
    BasicCtrDrbg drbg;
    drbg.update(seed_material);
    drbg.state_.reseed_counter = 1;
    return drbg;
  }

  Result<void> reseed(EntropySource& entropy,
                      std::span<const std::uint8_t> additional = {}) {
    if (additional.size() > kSeedLen) {
      return make_error(Errc::kRequestTooLarge, "additional input exceeds seed length");
    }
    std::array<std::uint8_t, kSeedLen> seed_material{};
    if (auto r = entropy.fill(seed_material); !r.ok()) return r.error();
    xor_into(seed_material, additional);
    update(seed_material);
    state_.reseed_counter = 1;
    return {};
  }

  Result<void> generate(std::span<std::uint8_t> out,
                        std::span<const std::uint8_t> additional = {}) {
    if (out.size() > kMaxBytesPerRequest) {
      return make_error(Errc::kRequestTooLarge, "request exceeds 2^19 bits");
    }
    if (additional.size() > kSeedLen) {
      return make_error(Errc::kRequestTooLarge, "additional input exceeds seed length");
    }
    if (state_.reseed_counter == 0) {
      return make_error(Errc::kNotInstantiated, "generate before instantiate");
    }
    if (state_.reseed_counter > reseed_interval_) {
      return make_error(Errc::kReseedRequired, "reseed interval exceeded");
    }
    std::array<std::uint8_t, kSeedLen> padded{};
    if (!additional.empty()) {
      std::memcpy(padded.data(), additional.data(), additional.size());
      update(padded);
    }
    Cipher cipher{std::span<const std::uint8_t, kKeyLen>(state_.key)};
    std::size_t done = 0;
    while (done < out.size()) {
      increment_v();
      std::uint8_t block[kBlockLen];
      cipher.encrypt_block(state_.v.data(), block);
      const std::size_t n = std::min(kBlockLen, out.size() - done);
      std::memcpy(out.data() + done, block, n);
      done += n;
    }
    update(padded);
    ++state_.reseed_counter;
    return {};
  }

  const State& state() const { return state_; }
  void restore_state(const State& s) { state_ = s; }
  static BasicCtrDrbg from_state(const State& s) {
    BasicCtrDrbg drbg;
    drbg.state_ = s;
    return drbg;
  }
  std::uint64_t reseed_counter() const { return state_.reseed_counter; }

  void set_reseed_interval(std::uint64_t interval) { reseed_interval_ = interval; }
  std::uint64_t reseed_interval() const { return reseed_interval_; }

 private:
  BasicCtrDrbg() = default;

  static void xor_into(std::array<std::uint8_t, kSeedLen>& dst,
                       std::span<const std::uint8_t> src) {
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] ^= src[i];
  }

  void increment_v() {
    for (int i = kBlockLen - 1; i >= 0; --i) {
      if (++state_.v[static_cast<std::size_t>(i)] != 0) break;
    }
  }

  // CTR_DRBG_Update (SP 800-90A 10.2.1.2): encrypt successive V+1.. blocks
  // under the old key, XOR the provided data, and split into new key / V.
  void update(const std::array<std::uint8_t, kSeedLen>& provided) {
    Cipher cipher{std::span<const std::uint8_t, kKeyLen>(state_.key)};
    std::array<std::uint8_t, kSeedLen> temp{};
    for (std::size_t off = 0; off < kSeedLen; off += kBlockLen) {
      increment_v();
      cipher.encrypt_block(state_.v.data(), temp.data() + off);
    }
    for (std::size_t i = 0; i < kSeedLen; ++i) temp[i] ^= provided[i];
    std::memcpy(state_.key.data(), temp.data(), kKeyLen);
    std::memcpy(state_.v.data(), temp.data() + kKeyLen, kBlockLen);
  }

  State state_;
  std::uint64_t reseed_interval_ = kDefaultReseedInterval;
};

using CtrDrbg = BasicCtrDrbg<Aes128>;
using CtrDrbg256 = BasicCtrDrbg<Aes256>;

}  // namespace snapsafe
