#pragma once

#include <array>
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <vector>

#include "snapsafe/bytes.hpp"
#include "snapsafe/result.hpp"

namespace snapsafe {

// 128-bit backend identity value; a change of this value is what drives a
// generation bump.
struct VmGenUuid {
  Block16 bytes{};

  friend bool operator==(const VmGenUuid&, const VmGenUuid&) = default;
};

// Read-only handle onto the device's shared page: a 4096-byte view whose
// first four bytes hold the current generation, little-endian, remaining
// bytes zero. The handle stays coherent across bumps and outlives the
// device.
class SharedView {
 public:
  SharedView() = default;

  std::uint32_t generation() const {
    return word_ ? word_->load(std::memory_order_acquire) : 0;
  }

  std::array<std::uint8_t, 4096> read_page() const {
    std::array<std::uint8_t, 4096> page{};
    store_le32(page.data(), generation());
    return page;
  }

  bool attached() const { return word_ != nullptr; }

 private:
  friend class SysGenDevice;
  explicit SharedView(std::shared_ptr<const std::atomic<std::uint32_t>> word)
      : word_(std::move(word)) {}

  std::shared_ptr<const std::atomic<std::uint32_t>> word_;
};

using WatcherId = std::uint64_t;

// Serializable device state for snapshot blobs.
struct DeviceImage {
  std::uint32_t generation = 0;
  VmGenUuid backend_uuid{};
  std::uint64_t next_watcher_id = 1;
  std::vector<std::pair<WatcherId, std::uint32_t>> watchers;  // (id, last_acked)
};

// Generation-ID device: watchers open handles, read pending generation
// updates (blocking or not), and acknowledge them by writing the value
// back. An orchestrator can count unacknowledged watchers or block until
// all have caught up. Safe for concurrent use by many watcher threads and
// one bump source.
class SysGenDevice {
 public:
  enum class ReadMode { kNonBlocking, kBlocking };

  explicit SysGenDevice(VmGenUuid initial_backend);
  static std::unique_ptr<SysGenDevice> from_image(const DeviceImage& image);

  WatcherId open_watcher();
  Result<void> close_watcher(WatcherId id);

  // Returns the current generation if it is newer than the handle's last
  // acknowledgment. Non-blocking mode fails with WouldBlock when there is
  // no pending update; blocking mode parks until a bump (or the handle is
  // closed from another thread).
  Result<std::uint32_t> read_watcher(WatcherId id, ReadMode mode);

  // Write-back acknowledgment: accepted only if `value` equals the current
  // generation; anything else (older or newer) fails with StaleAck and the
  // caller must re-read.
  Result<void> acknowledge(WatcherId id, std::uint32_t value);

  SharedView map_shared_view() const;

  int count_outdated_watchers() const;

  // Blocks until no open watcher is outdated. A watcher that closes without
  // acknowledging releases the wait.
  Result<void> wait_watchers(
      std::optional<std::chrono::milliseconds> timeout = std::nullopt);

  // Installs the new backend identity and advances the generation by one,
  // waking blocked readers. A bump to the identical identity is rejected.
  Result<std::uint32_t> backend_bump(const VmGenUuid& new_uuid);

  std::uint32_t generation() const;
  VmGenUuid backend_uuid() const;
  bool watcher_open(WatcherId id) const;
  std::optional<std::uint32_t> watcher_last_acked(WatcherId id) const;

  DeviceImage image() const;

 private:
  SysGenDevice() = default;

  int count_outdated_locked() const;

  mutable std::mutex mutex_;
  std::condition_variable readers_cv_;
  std::condition_variable watchers_cv_;
  std::uint32_t generation_ = 0;
  VmGenUuid backend_uuid_{};
  std::uint64_t next_watcher_id_ = 1;
  std::map<WatcherId, std::uint32_t> watchers_;  // id -> last_acked
  std::shared_ptr<std::atomic<std::uint32_t>> view_word_ =
      std::make_shared<std::atomic<std::uint32_t>>(0);
};

}  // namespace snapsafe
