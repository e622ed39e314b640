#include "snapsafe/feature_matrix.hpp"

#include <algorithm>
#include <cstring>

#include "snapsafe/entropy.hpp"
#include "snapsafe/gen_device.hpp"
#include "snapsafe/guard_memory.hpp"
#include "snapsafe/snapsafe_rng.hpp"

namespace snapsafe {

namespace {

VmGenUuid uuid_from(EntropySource& entropy) {
  VmGenUuid uuid;
  (void)entropy.fill(uuid.bytes);
  return uuid;
}

// Does a forked copy of the state get detected as stale? (Guard page: the
// fork wipe zeroes the live marker, so the adopted RNG reseeds.)
bool probe_guard_fork(std::uint64_t seed) {
  RegionRegistry parent;
  DeterministicEntropy entropy(seed, "probe/guard-fork");
  auto rng = SnapsafeRng::instantiate(parent, entropy, {});
  if (!rng.ok()) return false;
  auto before = rng.value().next_nonce();
  if (!before.ok()) return false;

  RegionRegistry child = parent.on_fork();
  DeterministicEntropy child_entropy(seed, "probe/guard-fork/child");
  auto adopted = SnapsafeRng::adopt(child, rng.value().guard_region(), child_entropy);
  if (!adopted.ok()) return false;
  const bool detected = !adopted.value().guard_live();
  auto after = adopted.value().next_nonce();
  return detected && after.ok() && adopted.value().stats().reseeds == 1 &&
         after.value() != before.value();
}

// Device-backed mechanisms never observe an in-guest fork: identity and
// generation read back unchanged, so a forked copy goes undetected.
bool probe_device_fork(std::uint64_t seed, bool check_uuid) {
  DeterministicEntropy entropy(seed, "probe/device-fork");
  SysGenDevice device(uuid_from(entropy));
  const VmGenUuid uuid_before = device.backend_uuid();
  const std::uint32_t gen_before = device.generation();

  RegionRegistry parent;
  auto region = parent.register_region(RegionRegistry::kPageSize, {});
  if (!region.ok()) return false;
  RegionRegistry child = parent.on_fork();
  (void)child;

  return check_uuid ? !(device.backend_uuid() == uuid_before)
                    : device.generation() != gen_before;
}

// Is a marked secret absent from the serialized snapshot?
bool probe_guard_secret_hiding(std::uint64_t seed) {
  RegionRegistry registry;
  auto region = registry.register_region(
      RegionRegistry::kPageSize,
      WipePolicy{.wipe_on_suspend = true, .exclude_from_snapshot = true});
  if (!region.ok()) return false;
  auto bytes = registry.mutate_bytes(region.value());
  if (!bytes.ok()) return false;
  DeterministicEntropy entropy(seed, "probe/secret");
  Bytes secret(48);
  (void)entropy.fill(secret);
  std::copy(secret.begin(), secret.end(), bytes.value().begin());

  (void)registry.on_suspend();
  auto stream = registry.serialize_snapshot();
  if (!stream.ok()) return false;
  const Bytes& blob = stream.value();
  return std::search(blob.begin(), blob.end(), secret.begin(), secret.end()) ==
         blob.end();
}

// Can the current state be told apart from stale state by reading memory?
bool probe_guard_in_memory(std::uint64_t seed) {
  RegionRegistry registry;
  DeterministicEntropy entropy(seed, "probe/guard-mem");
  auto rng = SnapsafeRng::instantiate(registry, entropy, {});
  if (!rng.ok()) return false;
  auto page = registry.read_bytes(rng.value().guard_region());
  if (!page.ok()) return false;
  return std::equal(SnapsafeRng::kLiveMarker.begin(), SnapsafeRng::kLiveMarker.end(),
                    page.value().begin());
}

bool probe_uuid_in_memory(std::uint64_t seed) {
  DeterministicEntropy entropy(seed, "probe/uuid-mem");
  const VmGenUuid uuid = uuid_from(entropy);
  SysGenDevice device(uuid);
  return device.backend_uuid() == uuid;  // identity readable back from the device
}

bool probe_gen_in_memory(std::uint64_t seed) {
  DeterministicEntropy entropy(seed, "probe/gen-mem");
  SysGenDevice device(uuid_from(entropy));
  const SharedView view = device.map_shared_view();
  if (!device.backend_bump(uuid_from(entropy)).ok()) return false;
  const auto page = view.read_page();
  return view.generation() == device.generation() &&
         load_le32(page.data()) == device.generation();
}

// Does the mechanism tell an orchestrator when every consumer caught up?
bool probe_gen_notification(std::uint64_t seed) {
  DeterministicEntropy entropy(seed, "probe/gen-notify");
  SysGenDevice device(uuid_from(entropy));
  const WatcherId watcher = device.open_watcher();
  if (device.count_outdated_watchers() != 0) return false;
  if (!device.backend_bump(uuid_from(entropy)).ok()) return false;
  if (device.count_outdated_watchers() != 1) return false;
  auto pending = device.read_watcher(watcher, SysGenDevice::ReadMode::kNonBlocking);
  if (!pending.ok()) return false;
  if (!device.acknowledge(watcher, pending.value()).ok()) return false;
  return device.count_outdated_watchers() == 0 && device.wait_watchers().ok();
}

// Does a change deliver fresh unpredictable bits (seed material)?
bool probe_uuid_entropy(std::uint64_t seed) {
  DeterministicEntropy entropy(seed, "probe/uuid-entropy");
  SysGenDevice device(uuid_from(entropy));
  const VmGenUuid before = device.backend_uuid();
  if (!device.backend_bump(uuid_from(entropy)).ok()) return false;
  return !(device.backend_uuid() == before) && before.bytes.size() == 16;
}

bool probe_gen_entropy(std::uint64_t seed) {
  DeterministicEntropy entropy(seed, "probe/gen-entropy");
  SysGenDevice device(uuid_from(entropy));
  for (std::uint32_t expect = 1; expect <= 3; ++expect) {
    auto bumped = device.backend_bump(uuid_from(entropy));
    if (!bumped.ok()) return false;
    if (bumped.value() != expect) return true;  // not the predictable counter
  }
  return false;  // pure counter: no seed material in the value itself
}

std::string yn(bool v) { return v ? "Yes" : "No"; }

}  // namespace

std::string FeatureMatrix::render() const {
  const std::array<std::string, 5> header = {"feature", "guard-page", "vmgenid",
                                             "sysgenid", "source"};
  std::array<std::size_t, 5> width{};
  for (std::size_t c = 0; c < 5; ++c) width[c] = header[c].size();
  for (const Row& row : rows) {
    width[0] = std::max(width[0], row.feature.size());
    for (std::size_t c = 0; c < 3; ++c) {
      width[c + 1] = std::max(width[c + 1], row.cells[c].size());
    }
  }

  std::string out;
  const auto emit = [&](const std::array<std::string, 5>& cells) {
    for (std::size_t c = 0; c < 5; ++c) {
      out += cells[c];
      if (c + 1 < 5) out.append(width[c] - cells[c].size() + 2, ' ');
    }
    out.push_back('\n');
  };
  emit(header);
  for (const Row& row : rows) {
    emit({row.feature, row.cells[0], row.cells[1], row.cells[2],
          row.probed ? "probed" : "static"});
  }
  return out;
}

FeatureMatrix build_feature_matrix(std::uint64_t seed) {
  FeatureMatrix matrix;
  const auto add = [&](std::string feature, std::string a, std::string b,
                       std::string c, bool probed) {
    matrix.rows.push_back(FeatureMatrix::Row{
        std::move(feature), {std::move(a), std::move(b), std::move(c)}, probed});
  };

  add("Mechanism", "Guard Page", "UUID", "Inc. Id", false);
  add("Works for fork", yn(probe_guard_fork(seed)),
      yn(probe_device_fork(seed, /*check_uuid=*/true)),
      yn(probe_device_fork(seed, /*check_uuid=*/false)), true);
  add("Secret hiding", yn(probe_guard_secret_hiding(seed)), "No", "No", true);
  add("In-memory", yn(probe_guard_in_memory(seed)), yn(probe_uuid_in_memory(seed)),
      yn(probe_gen_in_memory(seed)), true);
  add("Notification", "No", "No", yn(probe_gen_notification(seed)), true);
  // Deployment-environment rows: properties of the real kernel facilities
  // (who may call madvise vs open a device, what works inside seccomp
  // sandboxes and containers), outside what this library can probe.
  add("Non-root", "Yes", "No", "Yes", false);
  add("Min-privilege", "Yes", "No", "No", false);
  add("Entropy", "No", yn(probe_uuid_entropy(seed)), yn(probe_gen_entropy(seed)), true);
  add("Containers", "No", "No", "Yes", false);
  return matrix;
}

}  // namespace snapsafe
