#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "snapsafe/bytes.hpp"
#include "snapsafe/result.hpp"

namespace snapsafe {

// Per-region lifecycle policy. All flags independent; all-false is ordinary
// memory.
struct WipePolicy {
  bool wipe_on_fork = false;
  bool wipe_on_suspend = false;
  bool exclude_from_snapshot = false;

  std::uint8_t to_byte() const {
    return static_cast<std::uint8_t>((wipe_on_fork ? 1 : 0) |
                                     (wipe_on_suspend ? 2 : 0) |
                                     (exclude_from_snapshot ? 4 : 0));
  }
  static WipePolicy from_byte(std::uint8_t b) {
    return WipePolicy{(b & 1) != 0, (b & 2) != 0, (b & 4) != 0};
  }

  friend bool operator==(const WipePolicy&, const WipePolicy&) = default;
};

using RegionId = std::uint64_t;

// Registry of page-granular byte regions owned by one process or guest.
// Models kernel wipe-on-fork / wipe-on-suspend marking plus snapshot
// exclusion of secrets. Regions have stable addresses for the registry's
// lifetime; the registry itself is movable but deliberately not copyable
// (fork and snapshot-restore are the only duplication paths).
class RegionRegistry {
 public:
  static constexpr std::size_t kPageSize = 4096;
  // Snapshot stream header: 7-byte magic then a version byte, followed by
  // records of (id u64 LE, length u64 LE, policy byte, contents).
  static constexpr std::uint8_t kStreamMagic[7] = {'G', 'R', 'D', 'S', 'N', 'A', 'P'};
  static constexpr std::uint8_t kStreamVersion = 1;

  RegionRegistry() = default;
  RegionRegistry(RegionRegistry&&) = default;
  RegionRegistry& operator=(RegionRegistry&&) = default;

  Result<RegionId> register_region(std::size_t size, WipePolicy policy,
                                   std::uint8_t fill = 0);

  Result<std::span<const std::uint8_t>> read_bytes(RegionId id) const;
  // Mutable access counts as running: the next snapshot requires a fresh
  // suspend pass.
  Result<std::span<std::uint8_t>> mutate_bytes(RegionId id);
  std::optional<WipePolicy> policy(RegionId id) const;

  std::vector<RegionId> region_ids() const;
  std::size_t region_count() const { return regions_.size(); }

  // Fork: deep copy; child regions marked wipe_on_fork come up zeroed, the
  // parent is untouched.
  RegionRegistry on_fork() const;

  // Suspend: zeroes every wipe_on_suspend region in place, ahead of any
  // serialization. Returns the ids wiped (idempotent: re-suspending reports
  // the same set).
  std::vector<RegionId> on_suspend();

  // Serialization requires the suspend pass to have run with no mutation in
  // between; regions marked exclude_from_snapshot contribute zeros in place
  // of their contents.
  Result<Bytes> serialize_snapshot() const;
  static Result<RegionRegistry> deserialize_snapshot(std::span<const std::uint8_t> stream);

  bool suspended() const { return suspended_; }

  // Cheap hook for holders of cached region pointers (e.g. an RNG writing
  // its own state page) to record that memory changed since the last
  // suspend pass without re-resolving the region.
  void mark_running() { suspended_ = false; }

 private:
  struct Region {
    RegionId id;
    WipePolicy policy;
    Bytes bytes;
  };

  const Region* find(RegionId id) const;
  Region* find(RegionId id);

  std::vector<std::unique_ptr<Region>> regions_;
  RegionId next_id_ = 1;
  bool suspended_ = false;
};

}  // namespace snapsafe
