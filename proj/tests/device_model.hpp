#pragma once

// Naive reference model of the generation device, kept deliberately dumb:
// a map and an integer, no synchronization, every rule written out
// longhand. The property suites drive random operation schedules through
// this model and the real device in lockstep and require identical
// observable behavior.

#include <cstdint>
#include <map>
#include <optional>

#include "snapsafe/gen_device.hpp"

namespace snapsafe::testing {

struct ModelDevice {
  std::uint32_t generation = 0;
  VmGenUuid uuid{};
  std::uint64_t next_id = 1;
  std::map<std::uint64_t, std::uint32_t> watchers;  // id -> last acked

  std::uint64_t open() {
    const std::uint64_t id = next_id++;
    watchers[id] = generation;
    return id;
  }

  bool close(std::uint64_t id) { return watchers.erase(id) != 0; }

  // Mirrors non-blocking read: value if pending, WouldBlock if caught up,
  // ClosedHandle if unknown.
  std::optional<Errc> read_nonblocking(std::uint64_t id, std::uint32_t& out) {
    auto it = watchers.find(id);
    if (it == watchers.end()) return Errc::kClosedHandle;
    if (generation > it->second) {
      out = generation;
      return std::nullopt;
    }
    return Errc::kWouldBlock;
  }

  std::optional<Errc> acknowledge(std::uint64_t id, std::uint32_t value) {
    auto it = watchers.find(id);
    if (it == watchers.end()) return Errc::kClosedHandle;
    if (value != generation) return Errc::kStaleAck;
    it->second = value;
    return std::nullopt;
  }

  std::optional<Errc> bump(const VmGenUuid& new_uuid) {
    if (new_uuid == uuid) return Errc::kDuplicateUuid;
    if (generation == 0xffffffffu) return Errc::kGenerationOverflow;
    uuid = new_uuid;
    ++generation;
    return std::nullopt;
  }

  int outdated() const {
    int n = 0;
    for (const auto& [id, acked] : watchers) {
      if (acked < generation) ++n;
    }
    return n;
  }
};

}  // namespace snapsafe::testing
