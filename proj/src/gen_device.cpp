#include "snapsafe/gen_device.hpp"

#include <limits>

namespace snapsafe {

SysGenDevice::SysGenDevice(VmGenUuid initial_backend)
    : backend_uuid_(initial_backend) {}

std::unique_ptr<SysGenDevice> SysGenDevice::from_image(const DeviceImage& image) {
  auto dev = std::unique_ptr<SysGenDevice>(new SysGenDevice());
  dev->generation_ = image.generation;
  dev->backend_uuid_ = image.backend_uuid;
  dev->next_watcher_id_ = image.next_watcher_id;
  for (const auto& [id, acked] : image.watchers) dev->watchers_[id] = acked;
  dev->view_word_->store(image.generation, std::memory_order_release);
  return dev;
}

WatcherId SysGenDevice::open_watcher() {
  std::lock_guard lock(mutex_);
  const WatcherId id = next_watcher_id_++;
  // A handle opened now has by construction seen post-bump state, so it
  // starts fully acknowledged.
  watchers_.emplace(id, generation_);
  return id;
}

Result<void> SysGenDevice::close_watcher(WatcherId id) {
  std::lock_guard lock(mutex_);
  if (watchers_.erase(id) == 0) {
    return make_error(Errc::kClosedHandle, "watcher not open");
  }
  // Closing an un-acknowledged handle releases both blocked readers on this
  // handle and any orchestrator waiting for quiescence.
  readers_cv_.notify_all();
  watchers_cv_.notify_all();
  return {};
}

Result<std::uint32_t> SysGenDevice::read_watcher(WatcherId id, ReadMode mode) {
  std::unique_lock lock(mutex_);
  auto it = watchers_.find(id);
  if (it == watchers_.end()) {
    return make_error(Errc::kClosedHandle, "watcher not open");
  }
  if (generation_ > it->second) return generation_;
  if (mode == ReadMode::kNonBlocking) {
    return make_error(Errc::kWouldBlock, "no pending generation update");
  }
  readers_cv_.wait(lock, [&] {
    auto w = watchers_.find(id);
    return w == watchers_.end() || generation_ > w->second;
  });
  if (watchers_.find(id) == watchers_.end()) {
    return make_error(Errc::kClosedHandle, "watcher closed while blocked");
  }
  return generation_;
}

Result<void> SysGenDevice::acknowledge(WatcherId id, std::uint32_t value) {
  std::lock_guard lock(mutex_);
  auto it = watchers_.find(id);
  if (it == watchers_.end()) {
    return make_error(Errc::kClosedHandle, "watcher not open");
  }
  if (value != generation_) {
    return make_error(Errc::kStaleAck, "acknowledged value is not the current generation");
  }
  it->second = value;
  watchers_cv_.notify_all();
  return {};
}

SharedView SysGenDevice::map_shared_view() const {
  return SharedView(view_word_);
}

int SysGenDevice::count_outdated_locked() const {
  int count = 0;
  for (const auto& [id, acked] : watchers_) {
    if (acked < generation_) ++count;
  }
  return count;
}

int SysGenDevice::count_outdated_watchers() const {
  std::lock_guard lock(mutex_);
  return count_outdated_locked();
}

Result<void> SysGenDevice::wait_watchers(
    std::optional<std::chrono::milliseconds> timeout) {
  std::unique_lock lock(mutex_);
  const auto quiesced = [&] { return count_outdated_locked() == 0; };
  if (timeout.has_value()) {
    if (!watchers_cv_.wait_for(lock, *timeout, quiesced)) {
      return make_error(Errc::kTimeout, "watchers did not acknowledge in time");
    }
    return {};
  }
  watchers_cv_.wait(lock, quiesced);
  return {};
}

Result<std::uint32_t> SysGenDevice::backend_bump(const VmGenUuid& new_uuid) {
  std::lock_guard lock(mutex_);
  if (new_uuid == backend_uuid_) {
    return make_error(Errc::kDuplicateUuid, "backend identity did not change");
  }
  if (generation_ == std::numeric_limits<std::uint32_t>::max()) {
    return make_error(Errc::kGenerationOverflow, "generation counter exhausted");
  }
  backend_uuid_ = new_uuid;
  ++generation_;
  view_word_->store(generation_, std::memory_order_release);
  readers_cv_.notify_all();
  return generation_;
}

std::uint32_t SysGenDevice::generation() const {
  std::lock_guard lock(mutex_);
  return generation_;
}

VmGenUuid SysGenDevice::backend_uuid() const {
  std::lock_guard lock(mutex_);
  return backend_uuid_;
}

bool SysGenDevice::watcher_open(WatcherId id) const {
  std::lock_guard lock(mutex_);
  return watchers_.count(id) != 0;
}

std::optional<std::uint32_t> SysGenDevice::watcher_last_acked(WatcherId id) const {
  std::lock_guard lock(mutex_);
  auto it = watchers_.find(id);
  if (it == watchers_.end()) return std::nullopt;
  return it->second;
}

DeviceImage SysGenDevice::image() const {
  std::lock_guard lock(mutex_);
  DeviceImage img;
  img.generation = generation_;
  img.backend_uuid = backend_uuid_;
  img.next_watcher_id = next_watcher_id_;
  img.watchers.assign(watchers_.begin(), watchers_.end());
  return img;
}

}  // namespace snapsafe
