#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>

#include "snapsafe/ctr_drbg.hpp"
#include "snapsafe/entropy.hpp"
#include "snapsafe/gen_device.hpp"
#include "snapsafe/guard_memory.hpp"
#include "snapsafe/result.hpp"

namespace snapsafe {

// How the RNG learns that it is running in a copy:
//  - kSelfCheck: before every output, read the guard cell (zeroed marker =>
//    the kernel wiped us: fork or suspend) and, if a generation view is
//    attached, compare the recorded epoch against the device generation
//    (clone-restore without a wipe).
//  - kNotifyOnly: no self-checks; an external watcher actor must call
//    reseed() after processing a generation-change notification. Models
//    legacy integrations built purely on the blocking-read protocol.
enum class DetectionMode { kSelfCheck, kNotifyOnly };

// CTR_DRBG-backed random generator whose entire working state (cipher key,
// counter block, reseed counter, generation epoch, nonce counter) lives in
// one guarded page. A wipe or generation bump is therefore detected
// deterministically and forces a reseed before any output escapes.
class SnapsafeRng {
 public:
  static constexpr std::array<std::uint8_t, 8> kLiveMarker = {'S', 'E', 'E', 'D',
                                                              'E', 'D', '0', '1'};
  // Guard-page layout (byte offsets).
  static constexpr std::size_t kMarkerOff = 0;
  static constexpr std::size_t kKeyOff = 8;
  static constexpr std::size_t kVOff = 24;
  static constexpr std::size_t kReseedCounterOff = 40;
  static constexpr std::size_t kEpochOff = 48;
  static constexpr std::size_t kNonceValueOff = 64;
  static constexpr std::size_t kNonceBaseOff = 80;
  static constexpr std::size_t kNonceSeededOff = 96;

  struct Stats {
    std::uint64_t guard_checks = 0;
    std::uint64_t reseeds = 0;
  };

  // Registers a one-page guard region with `policy` in `registry`, seeds
  // the DRBG from `entropy` and marks the cell live. If `view` is given it
  // is attached and the current generation is recorded as this state's
  // epoch. The registry and entropy source must outlive the RNG.
  static Result<SnapsafeRng> instantiate(RegionRegistry& registry,
                                         EntropySource& entropy,
                                         std::span<const std::uint8_t> personalization,
                                         WipePolicy policy = {.wipe_on_fork = true,
                                                              .wipe_on_suspend = true},
                                         DetectionMode mode = DetectionMode::kSelfCheck,
                                         const SharedView* view = nullptr);

  // Re-binds an RNG onto an existing guard region, e.g. after a registry
  // was restored from a snapshot or duplicated by fork. No page writes
  // happen here; staleness is detected on the next output request.
  static Result<SnapsafeRng> adopt(RegionRegistry& registry, RegionId region,
                                   EntropySource& entropy,
                                   DetectionMode mode = DetectionMode::kSelfCheck);

  // Attaches a generation view without touching the recorded epoch: if the
  // page's epoch no longer matches the device, the next output reseeds.
  void attach_generation_view(SharedView view);

  // Fills `out` with DRBG output, reseeding first if the guard cell or
  // epoch says the state is stale (or the reseed interval ran out).
  Result<void> generate(std::span<std::uint8_t> out);

  // Explicit reseed: fresh entropy, guard cell re-marked live, epoch
  // re-recorded, nonce counter scheduled for rebase.
  Result<void> reseed(std::span<const std::uint8_t> additional = {});

  // Returns the next 128-bit nonce: strictly increasing within an epoch,
  // rebased onto fresh DRBG output whenever staleness is detected.
  Result<Block16> next_nonce();

  // Inspection hooks (tests and harness only).
  std::uint64_t reseed_counter() const;
  std::uint32_t epoch() const;
  bool guard_live() const;
  RegionId guard_region() const { return region_; }
  DetectionMode mode() const { return mode_; }
  const Stats& stats() const { return stats_; }
  void set_reseed_interval(std::uint64_t interval) { reseed_interval_ = interval; }

 private:
  SnapsafeRng(RegionRegistry& registry, RegionId region, std::uint8_t* page,
              EntropySource& entropy, DetectionMode mode);

  bool stale() const;
  Result<void> reseed_locked_state(std::span<const std::uint8_t> additional);
  Result<void> ensure_fresh();
  CtrDrbg load_drbg() const;
  void store_drbg(const CtrDrbg& drbg);

  RegionRegistry* registry_;
  RegionId region_;
  std::uint8_t* page_;  // stable for the registry's lifetime
  EntropySource* entropy_;
  DetectionMode mode_;
  SharedView view_;
  std::uint64_t reseed_interval_ = CtrDrbg::kDefaultReseedInterval;
  Stats stats_;
};

}  // namespace snapsafe
