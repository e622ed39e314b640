#pragma once

#include <cstdint>
#include <deque>
#include <memory>
#include <span>
#include <string_view>

#include "snapsafe/aes.hpp"
#include "snapsafe/bytes.hpp"
#include "snapsafe/result.hpp"

namespace snapsafe {

// Pluggable entropy provider: the DRBG pulls fixed-size seeds through this
// interface so tests and the simulator can substitute deterministic or
// failing sources.
class EntropySource {
 public:
  virtual ~EntropySource() = default;
  virtual Result<void> fill(std::span<std::uint8_t> out) = 0;
};

// Operating-system entropy (getrandom(2), /dev/urandom fallback).
class SystemEntropy final : public EntropySource {
 public:
  Result<void> fill(std::span<std::uint8_t> out) override;
};

// Hands out pre-loaded buffers in order; a request larger than the current
// buffer fails with EntropyUnavailable (models a depleted source).
class QueuedEntropy final : public EntropySource {
 public:
  QueuedEntropy() = default;
  explicit QueuedEntropy(Bytes first) { push(std::move(first)); }

  void push(Bytes buffer) { buffers_.push_back(std::move(buffer)); }
  std::size_t remaining_buffers() const { return buffers_.size(); }

  Result<void> fill(std::span<std::uint8_t> out) override;

 private:
  std::deque<Bytes> buffers_;
};

// Deterministic stream: AES-128-CTR keystream keyed from (seed, label).
// Distinct labels under one seed yield independent streams, which gives
// every simulated guest its own reproducible entropy lineage.
class DeterministicEntropy final : public EntropySource {
 public:
  DeterministicEntropy(std::uint64_t seed, std::string_view label);

  Result<void> fill(std::span<std::uint8_t> out) override;

 private:
  Aes128 cipher_;
  U128 counter_;
};

// Instrumentation wrapper: counts how many fills the wrapped source served.
class CountingEntropy final : public EntropySource {
 public:
  explicit CountingEntropy(EntropySource& inner) : inner_(&inner) {}

  Result<void> fill(std::span<std::uint8_t> out) override {
    ++fills_;
    return inner_->fill(out);
  }

  std::uint64_t fills() const { return fills_; }
  void reset() { fills_ = 0; }

 private:
  EntropySource* inner_;
  std::uint64_t fills_ = 0;
};

}  // namespace snapsafe
