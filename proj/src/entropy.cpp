#include "snapsafe/entropy.hpp"

#include <sys/random.h>

#include <algorithm>
#include <cerrno>
#include <cstdio>
#include <cstring>

namespace snapsafe {
namespace {

// Seeded Matyas-Meyer-Oseas compression over the label, so each
// (seed, label) pair keys an independent AES-CTR stream. H_0 encodes the
// seed; each 16-byte chunk re-keys the cipher: H_i = E_{H_{i-1}}(m_i) ^ m_i.
// The final block holds the label length (Merkle-Damgard strengthening).
Block16 derive_stream_key(std::uint64_t seed, std::string_view label) {
  Block16 h;
  store_le64(h.data(), seed);
  store_le64(h.data() + 8, ~seed);

  Bytes padded(label.begin(), label.end());
  padded.push_back(0x80);
  while (padded.size() % 16 != 8) padded.push_back(0x00);
  padded.resize(padded.size() + 8);
  store_le64(padded.data() + padded.size() - 8, label.size());

  for (std::size_t off = 0; off < padded.size(); off += 16) {
    Aes128 cipher(std::span<const std::uint8_t, 16>(h.data(), 16));
    Block16 enc;
    cipher.encrypt_block(padded.data() + off, enc.data());
    for (int i = 0; i < 16; ++i) {
      h[static_cast<std::size_t>(i)] =
          static_cast<std::uint8_t>(enc[static_cast<std::size_t>(i)] ^ padded[off + static_cast<std::size_t>(i)]);
    }
  }
  return h;
}

}  // namespace

Result<void> SystemEntropy::fill(std::span<std::uint8_t> out) {
  std::size_t done = 0;
  while (done < out.size()) {
    const ssize_t n = getrandom(out.data() + done, out.size() - done, 0);
    if (n < 0) {
      if (errno == EINTR) continue;
      break;  // fall through to /dev/urandom
    }
    done += static_cast<std::size_t>(n);
  }
  if (done == out.size()) return {};

  std::FILE* f = std::fopen("/dev/urandom", "rb");
  if (f == nullptr) {
    return make_error(Errc::kEntropyUnavailable, "no system entropy source");
  }
  const std::size_t n = std::fread(out.data() + done, 1, out.size() - done, f);
  std::fclose(f);
  if (done + n != out.size()) {
    return make_error(Errc::kEntropyUnavailable, "short read from /dev/urandom");
  }
  return {};
}

Result<void> QueuedEntropy::fill(std::span<std::uint8_t> out) {
  if (buffers_.empty()) {
    return make_error(Errc::kEntropyUnavailable, "entropy queue empty");
  }
  Bytes& front = buffers_.front();
  if (front.size() < out.size()) {
    return make_error(Errc::kEntropyUnavailable,
                      "entropy source yielded " + std::to_string(front.size()) +
                          " bytes, need " + std::to_string(out.size()));
  }
  std::memcpy(out.data(), front.data(), out.size());
  if (front.size() == out.size()) {
    buffers_.pop_front();
  } else {
    front.erase(front.begin(),
                front.begin() + static_cast<std::ptrdiff_t>(out.size()));
  }
  return {};
}

DeterministicEntropy::DeterministicEntropy(std::uint64_t seed, std::string_view label)
    : cipher_(std::span<const std::uint8_t, 16>(derive_stream_key(seed, label).data(), 16)) {}

Result<void> DeterministicEntropy::fill(std::span<std::uint8_t> out) {
  std::size_t done = 0;
  while (done < out.size()) {
    counter_.increment();
    Block16 block = counter_.to_bytes();
    Block16 keystream;
    cipher_.encrypt_block(block.data(), keystream.data());
    const std::size_t n = std::min<std::size_t>(16, out.size() - done);
    std::memcpy(out.data() + done, keystream.data(), n);
    done += n;
  }
  return {};
}

}  // namespace snapsafe
