#include "snapsafe/guard_memory.hpp"

#include <algorithm>
#include <cstring>

namespace snapsafe {

namespace {
// Reject absurd record lengths before allocating (fuzzed streams).
constexpr std::uint64_t kMaxRegionBytes = 1ull << 32;
}  // namespace

Result<RegionId> RegionRegistry::register_region(std::size_t size, WipePolicy policy,
                                                 std::uint8_t fill) {
  if (size == 0 || size % kPageSize != 0) {
    return make_error(Errc::kBadSize, "region size must be a positive multiple of 4096");
  }
  auto region = std::make_unique<Region>();
  region->id = next_id_++;
  region->policy = policy;
  region->bytes.assign(size, fill);
  const RegionId id = region->id;
  regions_.push_back(std::move(region));
  suspended_ = false;
  return id;
}

const RegionRegistry::Region* RegionRegistry::find(RegionId id) const {
  for (const auto& r : regions_) {
    if (r->id == id) return r.get();
  }
  return nullptr;
}

RegionRegistry::Region* RegionRegistry::find(RegionId id) {
  for (auto& r : regions_) {
    if (r->id == id) return r.get();
  }
  return nullptr;
}

Result<std::span<const std::uint8_t>> RegionRegistry::read_bytes(RegionId id) const {
  const Region* r = find(id);
  if (r == nullptr) return make_error(Errc::kNoSuchRegion, "unknown region id");
  return std::span<const std::uint8_t>(r->bytes);
}

Result<std::span<std::uint8_t>> RegionRegistry::mutate_bytes(RegionId id) {
  Region* r = find(id);
  if (r == nullptr) return make_error(Errc::kNoSuchRegion, "unknown region id");
  suspended_ = false;
  return std::span<std::uint8_t>(r->bytes);
}

std::optional<WipePolicy> RegionRegistry::policy(RegionId id) const {
  const Region* r = find(id);
  if (r == nullptr) return std::nullopt;
  return r->policy;
}

std::vector<RegionId> RegionRegistry::region_ids() const {
  std::vector<RegionId> ids;
  ids.reserve(regions_.size());
  for (const auto& r : regions_) ids.push_back(r->id);
  return ids;
}

RegionRegistry RegionRegistry::on_fork() const {
  RegionRegistry child;
  child.next_id_ = next_id_;
  child.regions_.reserve(regions_.size());
  for (const auto& r : regions_) {
    auto copy = std::make_unique<Region>(*r);
    if (copy->policy.wipe_on_fork) {
      std::fill(copy->bytes.begin(), copy->bytes.end(), 0);
    }
    child.regions_.push_back(std::move(copy));
  }
  return child;
}

std::vector<RegionId> RegionRegistry::on_suspend() {
  std::vector<RegionId> wiped;
  for (auto& r : regions_) {
    if (r->policy.wipe_on_suspend) {
      std::fill(r->bytes.begin(), r->bytes.end(), 0);
      wiped.push_back(r->id);
    }
  }
  suspended_ = true;
  return wiped;
}

Result<Bytes> RegionRegistry::serialize_snapshot() const {
  if (!suspended_) {
    return make_error(Errc::kSuspendNotRun,
                      "snapshot serialization requires a suspend pass first");
  }
  Bytes out;
  out.insert(out.end(), std::begin(kStreamMagic), std::end(kStreamMagic));
  out.push_back(kStreamVersion);
  for (const auto& r : regions_) {
    std::uint8_t header[17];
    store_le64(header, r->id);
    store_le64(header + 8, r->bytes.size());
    header[16] = r->policy.to_byte();
    out.insert(out.end(), header, header + sizeof(header));
    if (r->policy.exclude_from_snapshot) {
      out.insert(out.end(), r->bytes.size(), 0);
    } else {
      out.insert(out.end(), r->bytes.begin(), r->bytes.end());
    }
  }
  return out;
}

Result<RegionRegistry> RegionRegistry::deserialize_snapshot(
    std::span<const std::uint8_t> stream) {
  if (stream.size() < 8 ||
      std::memcmp(stream.data(), kStreamMagic, sizeof(kStreamMagic)) != 0) {
    return make_error(Errc::kCorruptStream, "bad snapshot magic");
  }
  if (stream[7] != kStreamVersion) {
    return make_error(Errc::kCorruptStream, "unsupported snapshot version");
  }
  RegionRegistry reg;
  std::size_t off = 8;
  while (off < stream.size()) {
    if (stream.size() - off < 17) {
      return make_error(Errc::kCorruptStream, "truncated record header");
    }
    const RegionId id = load_le64(stream.data() + off);
    const std::uint64_t len = load_le64(stream.data() + off + 8);
    const std::uint8_t policy_byte = stream[off + 16];
    off += 17;
    if (len == 0 || len % kPageSize != 0 || len > kMaxRegionBytes) {
      return make_error(Errc::kCorruptStream, "bad region length");
    }
    if (policy_byte > 7) {
      return make_error(Errc::kCorruptStream, "bad policy byte");
    }
    if (stream.size() - off < len) {
      return make_error(Errc::kCorruptStream, "truncated region contents");
    }
    if (reg.find(id) != nullptr) {
      return make_error(Errc::kCorruptStream, "duplicate region id");
    }
    auto region = std::make_unique<Region>();
    region->id = id;
    region->policy = WipePolicy::from_byte(policy_byte);
    region->bytes.assign(stream.begin() + static_cast<std::ptrdiff_t>(off),
                         stream.begin() + static_cast<std::ptrdiff_t>(off + len));
    off += len;
    reg.next_id_ = std::max(reg.next_id_, id + 1);
    reg.regions_.push_back(std::move(region));
  }
  // A restored registry is running state: the next snapshot needs its own
  // suspend pass.
  reg.suspended_ = false;
  return reg;
}

}  // namespace snapsafe
