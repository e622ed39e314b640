#include "snapsafe/snapsafe_rng.hpp"

#include <cstring>

namespace snapsafe {

SnapsafeRng::SnapsafeRng(RegionRegistry& registry, RegionId region,
                         std::uint8_t* page, EntropySource& entropy,
                         DetectionMode mode)
    : registry_(&registry),
      region_(region),
      page_(page),
      entropy_(&entropy),
      mode_(mode) {}

Result<SnapsafeRng> SnapsafeRng::instantiate(RegionRegistry& registry,
                                             EntropySource& entropy,
                                             std::span<const std::uint8_t> personalization,
                                             WipePolicy policy, DetectionMode mode,
                                             const SharedView* view) {
  auto region = registry.register_region(RegionRegistry::kPageSize, policy);
  if (!region.ok()) return region.error();
  auto page = registry.mutate_bytes(region.value());
  if (!page.ok()) return page.error();

  SnapsafeRng rng(registry, region.value(), page.value().data(), entropy, mode);
  auto drbg = CtrDrbg::instantiate(entropy, personalization);
  if (!drbg.ok()) return drbg.error();
  rng.store_drbg(drbg.value());
  std::memcpy(rng.page_ + kMarkerOff, kLiveMarker.data(), kLiveMarker.size());
  if (view != nullptr) {
    rng.view_ = *view;
    store_le32(rng.page_ + kEpochOff, rng.view_.generation());
  }
  ++rng.stats_.reseeds;
  return rng;
}

Result<SnapsafeRng> SnapsafeRng::adopt(RegionRegistry& registry, RegionId region,
                                       EntropySource& entropy, DetectionMode mode) {
  auto page = registry.mutate_bytes(region);
  if (!page.ok()) return page.error();
  if (page.value().size() != RegionRegistry::kPageSize) {
    return make_error(Errc::kBadSize, "guard region must be exactly one page");
  }
  return SnapsafeRng(registry, region, page.value().data(), entropy, mode);
}

void SnapsafeRng::attach_generation_view(SharedView view) { view_ = view; }

bool SnapsafeRng::guard_live() const {
  return std::memcmp(page_ + kMarkerOff, kLiveMarker.data(), kLiveMarker.size()) == 0;
}

bool SnapsafeRng::stale() const {
  if (!guard_live()) return true;
  if (mode_ == DetectionMode::kSelfCheck && view_.attached() &&
      load_le32(page_ + kEpochOff) != view_.generation()) {
    return true;
  }
  return false;
}

Result<void> SnapsafeRng::reseed_locked_state(std::span<const std::uint8_t> additional) {
  CtrDrbg drbg = load_drbg();
  if (auto r = drbg.reseed(*entropy_, additional); !r.ok()) return r;
  store_drbg(drbg);
  std::memcpy(page_ + kMarkerOff, kLiveMarker.data(), kLiveMarker.size());
  if (view_.attached()) store_le32(page_ + kEpochOff, view_.generation());
  // Any cached nonce progression belongs to the previous identity.
  page_[kNonceSeededOff] = 0;
  ++stats_.reseeds;
  return {};
}

Result<void> SnapsafeRng::reseed(std::span<const std::uint8_t> additional) {
  registry_->mark_running();
  if (!guard_live()) {
    // The wipe also zeroed the reseed counter; rebuild from scratch so the
    // counter discipline stays per-spec (counter = 1 after reseed).
    std::memset(page_ + kKeyOff, 0, 16);
    std::memset(page_ + kVOff, 0, 16);
    store_le64(page_ + kReseedCounterOff, 0);
  }
  return reseed_locked_state(additional);
}

CtrDrbg SnapsafeRng::load_drbg() const {
  CtrDrbg::State state;
  std::memcpy(state.key.data(), page_ + kKeyOff, 16);
  std::memcpy(state.v.data(), page_ + kVOff, 16);
  state.reseed_counter = load_le64(page_ + kReseedCounterOff);
  CtrDrbg drbg = CtrDrbg::from_state(state);
  drbg.set_reseed_interval(reseed_interval_);
  return drbg;
}

void SnapsafeRng::store_drbg(const CtrDrbg& drbg) {
  const CtrDrbg::State& state = drbg.state();
  std::memcpy(page_ + kKeyOff, state.key.data(), 16);
  std::memcpy(page_ + kVOff, state.v.data(), 16);
  store_le64(page_ + kReseedCounterOff, state.reseed_counter);
}

Result<void> SnapsafeRng::ensure_fresh() {
  ++stats_.guard_checks;
  if (mode_ == DetectionMode::kSelfCheck ? stale() : !guard_live()) {
    return reseed({});
  }
  return {};
}

Result<void> SnapsafeRng::generate(std::span<std::uint8_t> out) {
  registry_->mark_running();
  if (auto r = ensure_fresh(); !r.ok()) return r;
  CtrDrbg drbg = load_drbg();
  auto r = drbg.generate(out);
  if (!r.ok() && r.error().code == Errc::kReseedRequired) {
    if (auto rs = drbg.reseed(*entropy_, {}); !rs.ok()) return rs;
    ++stats_.reseeds;
    r = drbg.generate(out);
  }
  if (!r.ok()) return r;
  store_drbg(drbg);
  return {};
}

Result<Block16> SnapsafeRng::next_nonce() {
  registry_->mark_running();
  if (auto r = ensure_fresh(); !r.ok()) return r.error();
  if (page_[kNonceSeededOff] == 0) {
    Block16 base;
    CtrDrbg drbg = load_drbg();
    auto r = drbg.generate(base);
    if (!r.ok() && r.error().code == Errc::kReseedRequired) {
      if (auto rs = drbg.reseed(*entropy_, {}); !rs.ok()) return rs.error();
      ++stats_.reseeds;
      r = drbg.generate(base);
    }
    if (!r.ok()) return r.error();
    store_drbg(drbg);
    std::memcpy(page_ + kNonceBaseOff, base.data(), 16);
    std::memcpy(page_ + kNonceValueOff, base.data(), 16);
    page_[kNonceSeededOff] = 1;
    return base;
  }
  Block16 current;
  std::memcpy(current.data(), page_ + kNonceValueOff, 16);
  U128 value = U128::from_bytes(current);
  value.increment();
  const Block16 next = value.to_bytes();
  std::memcpy(page_ + kNonceValueOff, next.data(), 16);
  return next;
}

std::uint64_t SnapsafeRng::reseed_counter() const {
  return load_le64(page_ + kReseedCounterOff);
}

std::uint32_t SnapsafeRng::epoch() const { return load_le32(page_ + kEpochOff); }

}  // namespace snapsafe
