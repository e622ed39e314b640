#include "snapsafe/vm_sim.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstring>

namespace snapsafe {

namespace {

constexpr std::uint8_t kBlobMagic[6] = {'V', 'M', 'S', 'N', 'A', 'P'};
constexpr std::uint8_t kBlobVersion = 1;

struct BlobReader {
  std::span<const std::uint8_t> data;
  std::size_t off = 0;
  bool failed = false;

  bool need(std::size_t n) {
    if (failed || data.size() - off < n) {
      failed = true;
      return false;
    }
    return true;
  }
  std::uint8_t u8() {
    if (!need(1)) return 0;
    return data[off++];
  }
  std::uint32_t u32() {
    if (!need(4)) return 0;
    const std::uint32_t v = load_le32(data.data() + off);
    off += 4;
    return v;
  }
  std::uint64_t u64() {
    if (!need(8)) return 0;
    const std::uint64_t v = load_le64(data.data() + off);
    off += 8;
    return v;
  }
  Bytes bytes(std::size_t n) {
    if (!need(n)) return {};
    Bytes out(data.begin() + static_cast<std::ptrdiff_t>(off),
              data.begin() + static_cast<std::ptrdiff_t>(off + n));
    off += n;
    return out;
  }
};

void put_u8(Bytes& out, std::uint8_t v) { out.push_back(v); }
void put_u32(Bytes& out, std::uint32_t v) {
  std::uint8_t buf[4];
  store_le32(buf, v);
  out.insert(out.end(), buf, buf + 4);
}
void put_u64(Bytes& out, std::uint64_t v) {
  std::uint8_t buf[8];
  store_le64(buf, v);
  out.insert(out.end(), buf, buf + 8);
}

WipePolicy policy_for_mode(RngMode mode) {
  switch (mode) {
    case RngMode::kGuardPage:
      return WipePolicy{.wipe_on_fork = true, .wipe_on_suspend = true};
    case RngMode::kViewOnly:
    case RngMode::kWatcher:
      return WipePolicy{};
  }
  return WipePolicy{};
}

DetectionMode detection_for_mode(RngMode mode) {
  return mode == RngMode::kWatcher ? DetectionMode::kNotifyOnly
                                   : DetectionMode::kSelfCheck;
}

bool valid_boot_id(std::string_view id) {
  if (id.empty()) return false;
  for (char c : id) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-')) {
      return false;
    }
  }
  return true;
}

bool parse_u64(std::string_view text, std::uint64_t& out) {
  const char* end = text.data() + text.size();
  auto [p, ec] = std::from_chars(text.data(), end, out);
  return ec == std::errc() && p == end;
}

}  // namespace

std::string_view event_kind_name(EventKind kind) {
  switch (kind) {
    case EventKind::kBoot: return "Boot";
    case EventKind::kSuspend: return "Suspend";
    case EventKind::kSnapshot: return "Snapshot";
    case EventKind::kCloneRestore: return "CloneRestore";
    case EventKind::kPlainRestore: return "PlainRestore";
    case EventKind::kResume: return "Resume";
    case EventKind::kFork: return "Fork";
    case EventKind::kReboot: return "Reboot";
    case EventKind::kPause: return "Pause";
    case EventKind::kLiveMigrate: return "LiveMigrate";
    case EventKind::kInvoke: return "Invoke";
    case EventKind::kFence: return "Fence";
  }
  return "Unknown";
}

std::optional<EventKind> parse_event_kind(std::string_view name) {
  if (name == "boot") return EventKind::kBoot;
  if (name == "suspend") return EventKind::kSuspend;
  if (name == "snapshot") return EventKind::kSnapshot;
  if (name == "clone") return EventKind::kCloneRestore;
  if (name == "plain_restore") return EventKind::kPlainRestore;
  if (name == "resume") return EventKind::kResume;
  if (name == "fork") return EventKind::kFork;
  if (name == "reboot") return EventKind::kReboot;
  if (name == "pause") return EventKind::kPause;
  if (name == "live_migrate") return EventKind::kLiveMigrate;
  if (name == "invoke") return EventKind::kInvoke;
  if (name == "fence") return EventKind::kFence;
  return std::nullopt;
}

PolicyTable PolicyTable::defaults() {
  PolicyTable table;
  table.set(EventKind::kCloneRestore, true);
  return table;
}

Result<HandlerProgram> parse_handler_program(std::string_view text) {
  HandlerProgram program;
  if (text.empty()) return program;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t comma = std::min(text.find(',', pos), text.size());
    const std::string_view op = text.substr(pos, comma - pos);
    const std::size_t colon = op.find(':');
    if (colon == std::string_view::npos || colon + 1 >= op.size()) {
      return make_error(Errc::kParseError,
                        "handler op must be name:arg, got '" + std::string(op) + "'");
    }
    const std::string_view name = op.substr(0, colon);
    const std::string_view arg = op.substr(colon + 1);
    HandlerOp parsed;
    if (name == "nonce" || name == "bytes" || name == "sleep") {
      std::uint64_t count = 0;
      if (!parse_u64(arg, count) || count == 0) {
        return make_error(Errc::kParseError,
                          "handler op '" + std::string(name) + "' needs a positive count");
      }
      parsed.kind = name == "nonce"   ? HandlerOp::Kind::kDrawNonce
                    : name == "bytes" ? HandlerOp::Kind::kDrawBytes
                                      : HandlerOp::Kind::kSleep;
      parsed.count = count;
    } else if (name == "cache" || name == "emit") {
      parsed.kind = name == "cache" ? HandlerOp::Kind::kCacheNonce
                                    : HandlerOp::Kind::kEmitCached;
      parsed.slot = std::string(arg);
    } else {
      return make_error(Errc::kParseError, "unknown handler op '" + std::string(name) + "'");
    }
    program.push_back(std::move(parsed));
    if (comma == text.size()) break;
    pos = comma + 1;
  }
  return program;
}

std::string render_handler_program(const HandlerProgram& program) {
  std::string out;
  for (const HandlerOp& op : program) {
    if (!out.empty()) out.push_back(',');
    switch (op.kind) {
      case HandlerOp::Kind::kDrawNonce:
        out += "nonce:" + std::to_string(op.count);
        break;
      case HandlerOp::Kind::kDrawBytes:
        out += "bytes:" + std::to_string(op.count);
        break;
      case HandlerOp::Kind::kSleep:
        out += "sleep:" + std::to_string(op.count);
        break;
      case HandlerOp::Kind::kCacheNonce:
        out += "cache:" + op.slot;
        break;
      case HandlerOp::Kind::kEmitCached:
        out += "emit:" + op.slot;
        break;
    }
  }
  return out;
}

bool glob_match(std::string_view pattern, std::string_view id) {
  // Iterative matcher with single-star backtracking; '*' and '?' never
  // match '.', which keeps lineage depths separate.
  std::size_t p = 0, s = 0;
  std::size_t star_p = std::string_view::npos, star_s = 0;
  while (s < id.size()) {
    if (p < pattern.size() &&
        (pattern[p] == id[s] || (pattern[p] == '?' && id[s] != '.'))) {
      ++p;
      ++s;
    } else if (p < pattern.size() && pattern[p] == '*') {
      star_p = p++;
      star_s = s;
    } else if (star_p != std::string_view::npos && id[star_s] != '.') {
      p = star_p + 1;
      s = ++star_s;
    } else {
      return false;
    }
  }
  while (p < pattern.size() && pattern[p] == '*') ++p;
  return p == pattern.size();
}

std::string LogRecord::render() const {
  return "t=" + std::to_string(tick) + " guest=" + guest + " event=" +
         std::string(event) + " gen=" + std::to_string(gen) + " detail=" + detail;
}

std::string EventLog::render() const {
  std::string out;
  std::size_t total = 0;
  for (const LogRecord& r : records) total += r.guest.size() + r.detail.size() + 40;
  out.reserve(total);
  for (const LogRecord& r : records) {
    out += r.render();
    out.push_back('\n');
  }
  return out;
}

std::string_view rng_mode_name(RngMode mode) {
  switch (mode) {
    case RngMode::kGuardPage: return "guard";
    case RngMode::kViewOnly: return "view";
    case RngMode::kWatcher: return "watcher";
  }
  return "unknown";
}

std::optional<RngMode> parse_rng_mode(std::string_view name) {
  if (name == "guard") return RngMode::kGuardPage;
  if (name == "view") return RngMode::kViewOnly;
  if (name == "watcher") return RngMode::kWatcher;
  return std::nullopt;
}

World::World(std::uint64_t seed, Config config)
    : seed_(seed), config_(std::move(config)), uuid_stream_(seed, "uuid") {}

World::Guest* World::find_guest(const std::string& id) {
  auto it = guests_.find(id);
  return it == guests_.end() ? nullptr : it->second.get();
}

const World::Guest* World::find_guest(const std::string& id) const {
  auto it = guests_.find(id);
  return it == guests_.end() ? nullptr : it->second.get();
}

VmGenUuid World::next_uuid() {
  VmGenUuid uuid;
  (void)uuid_stream_.fill(uuid.bytes);
  return uuid;
}

void World::apply_rules(Guest& guest) {
  for (const auto& [pattern, program] : config_.handler_rules) {
    if (glob_match(pattern, guest.id)) guest.handler = program;
  }
  for (const auto& [pattern, mode] : config_.rng_mode_rules) {
    if (glob_match(pattern, guest.id)) guest.rng_mode = mode;
  }
}

void World::log_event(std::uint64_t tick, const std::string& guest,
                      std::string_view event, std::uint32_t gen, std::string detail) {
  log_.records.push_back(LogRecord{tick, guest, std::string(event), gen,
                                   std::move(detail)});
}

void World::log_error(std::uint64_t tick, const std::string& guest, EventKind kind,
                      const Error& error) {
  const Guest* g = find_guest(guest);
  log_event(tick, guest, event_kind_name(kind), g ? g->device->generation() : 0,
            "error:" + std::string(errc_name(error.code)));
}

Result<void> World::boot(const std::string& id, std::uint64_t tick) {
  if (!valid_boot_id(id)) {
    return make_error(Errc::kSimError, "boot id must be [A-Za-z0-9_-]+ (dots are lineage)");
  }
  if (guests_.count(id) != 0) {
    return make_error(Errc::kSimError, "guest id already exists");
  }
  auto r = create_guest(id, tick, nullptr, false, "");
  if (!r.ok()) return r;
  Guest& guest = *guests_.at(id);
  log_event(tick, id, event_kind_name(EventKind::kBoot), guest.device->generation(), "ok");
  return {};
}

Result<void> World::create_guest(const std::string& id, std::uint64_t tick,
                                 const Bytes* blob, bool bump, const std::string& parent) {
  auto guest = std::make_unique<Guest>();
  guest->id = id;
  guest->created_tick = tick;
  guest->creation_index = next_creation_index_++;
  guest->entropy = std::make_unique<DeterministicEntropy>(seed_, "guest/" + id);

  if (blob == nullptr) {
    guest->device = std::make_unique<SysGenDevice>(next_uuid());
    guest->processes[0] = std::make_unique<RegionRegistry>();
    apply_rules(*guest);
    const SharedView view = guest->device->map_shared_view();
    std::span<const std::uint8_t> pers(
        reinterpret_cast<const std::uint8_t*>(id.data()), std::min<std::size_t>(id.size(), 32));
    auto rng = SnapsafeRng::instantiate(*guest->processes[0], *guest->entropy, pers,
                                        policy_for_mode(guest->rng_mode),
                                        detection_for_mode(guest->rng_mode), &view);
    if (!rng.ok()) return rng.error();
    guest->rng_region = rng.value().guard_region();
    guest->rng.emplace(std::move(rng.value()));
    for (const auto& [pattern, delay] : config_.watcher_rules) {
      if (glob_match(pattern, id)) {
        guest->watchers.push_back(WatcherActor{guest->device->open_watcher(), delay, std::nullopt});
      }
    }
  } else {
    guest->rng_mode = RngMode::kGuardPage;  // placeholder; restore overwrites
    apply_rules(*guest);
    if (auto r = restore_from_blob(*guest, *blob, bump, tick); !r.ok()) return r;
  }

  tree_[id].parent = parent;
  tree_[id].created_tick = tick;
  if (!parent.empty()) tree_[parent].children.push_back(id);
  guests_.emplace(id, std::move(guest));
  return {};
}

Bytes World::build_blob(Guest& guest) const {
  Bytes out;
  out.insert(out.end(), std::begin(kBlobMagic), std::end(kBlobMagic));
  put_u8(out, kBlobVersion);

  const DeviceImage dev = guest.device->image();
  put_u32(out, dev.generation);
  out.insert(out.end(), dev.backend_uuid.bytes.begin(), dev.backend_uuid.bytes.end());
  put_u64(out, dev.next_watcher_id);
  put_u32(out, static_cast<std::uint32_t>(dev.watchers.size()));
  for (const auto& [wid, acked] : dev.watchers) {
    put_u64(out, wid);
    put_u32(out, acked);
  }

  put_u8(out, guest.rng.has_value() ? 1 : 0);
  put_u64(out, guest.rng_region);
  put_u8(out, static_cast<std::uint8_t>(guest.rng_mode));

  put_u32(out, static_cast<std::uint32_t>(guest.watchers.size()));
  for (const WatcherActor& actor : guest.watchers) {
    put_u64(out, actor.handle);
    put_u8(out, actor.ack_delay.has_value() ? 1 : 0);
    put_u64(out, actor.ack_delay.value_or(0));
  }

  put_u32(out, static_cast<std::uint32_t>(guest.cache_slots.size()));
  for (const auto& [name, value] : guest.cache_slots) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    out.insert(out.end(), value.begin(), value.end());
  }

  put_u32(out, static_cast<std::uint32_t>(guest.processes.size()));
  for (const auto& [pid, registry] : guest.processes) {
    put_u64(out, pid);
    auto stream = registry->serialize_snapshot();
    // Caller ensures the suspend pass ran; a failure here is a programming
    // error surfaced as an empty stream record.
    Bytes bytes;
    if (stream.ok()) bytes = std::move(stream.value());
    put_u64(out, bytes.size());
    out.insert(out.end(), bytes.begin(), bytes.end());
  }
  put_u64(out, guest.next_pid);
  return out;
}

Result<void> World::restore_from_blob(Guest& guest, const Bytes& blob, bool bump,
                                      std::uint64_t tick) {
  BlobReader r{blob};
  Bytes magic = r.bytes(sizeof(kBlobMagic));
  if (r.failed || std::memcmp(magic.data(), kBlobMagic, sizeof(kBlobMagic)) != 0 ||
      r.u8() != kBlobVersion) {
    return make_error(Errc::kCorruptStream, "bad snapshot blob header");
  }

  DeviceImage dev;
  dev.generation = r.u32();
  {
    Bytes uuid = r.bytes(16);
    if (!r.failed) std::copy(uuid.begin(), uuid.end(), dev.backend_uuid.bytes.begin());
  }
  dev.next_watcher_id = r.u64();
  const std::uint32_t watcher_count = r.u32();
  for (std::uint32_t i = 0; i < watcher_count && !r.failed; ++i) {
    const WatcherId wid = r.u64();
    const std::uint32_t acked = r.u32();
    dev.watchers.emplace_back(wid, acked);
  }

  const bool has_rng = r.u8() != 0;
  const RegionId rng_region = r.u64();
  const std::uint8_t mode_byte = r.u8();
  if (mode_byte > 2) return make_error(Errc::kCorruptStream, "bad rng mode byte");

  std::vector<WatcherActor> actors;
  const std::uint32_t actor_count = r.u32();
  for (std::uint32_t i = 0; i < actor_count && !r.failed; ++i) {
    WatcherActor actor;
    actor.handle = r.u64();
    const bool has_delay = r.u8() != 0;
    const std::uint64_t delay = r.u64();
    if (has_delay) actor.ack_delay = delay;
    actors.push_back(actor);
  }

  std::map<std::string, Block16> slots;
  const std::uint32_t slot_count = r.u32();
  for (std::uint32_t i = 0; i < slot_count && !r.failed; ++i) {
    const std::uint32_t name_len = r.u32();
    if (name_len > 4096) return make_error(Errc::kCorruptStream, "slot name too long");
    Bytes name = r.bytes(name_len);
    Bytes value = r.bytes(16);
    Block16 block{};
    if (!r.failed) std::copy(value.begin(), value.end(), block.begin());
    slots.emplace(std::string(name.begin(), name.end()), block);
  }

  std::map<std::uint64_t, std::unique_ptr<RegionRegistry>> processes;
  const std::uint32_t process_count = r.u32();
  if (process_count > 4096) return make_error(Errc::kCorruptStream, "too many processes");
  for (std::uint32_t i = 0; i < process_count && !r.failed; ++i) {
    const std::uint64_t pid = r.u64();
    const std::uint64_t stream_len = r.u64();
    Bytes stream = r.bytes(stream_len);
    if (r.failed) break;
    auto registry = RegionRegistry::deserialize_snapshot(stream);
    if (!registry.ok()) return registry.error();
    processes.emplace(pid, std::make_unique<RegionRegistry>(std::move(registry.value())));
  }
  const std::uint64_t next_pid = r.u64();
  if (r.failed || r.off != blob.size()) {
    return make_error(Errc::kCorruptStream, "truncated or oversized snapshot blob");
  }
  if (processes.count(0) == 0) {
    return make_error(Errc::kCorruptStream, "snapshot blob lacks main process");
  }

  guest.device = SysGenDevice::from_image(dev);
  guest.processes = std::move(processes);
  guest.next_pid = next_pid;
  guest.watchers = std::move(actors);
  guest.cache_slots = std::move(slots);
  guest.rng_mode = static_cast<RngMode>(mode_byte);
  guest.rng_region = rng_region;

  if (bump) {
    auto bumped = guest.device->backend_bump(next_uuid());
    if (!bumped.ok()) return bumped.error();
    for (WatcherActor& actor : guest.watchers) {
      if (actor.ack_delay.has_value()) actor.pending_ack_at = tick + *actor.ack_delay;
    }
  }

  if (has_rng) {
    auto rng = SnapsafeRng::adopt(*guest.processes.at(0), rng_region, *guest.entropy,
                                  detection_for_mode(guest.rng_mode));
    if (!rng.ok()) return rng.error();
    rng.value().attach_generation_view(guest.device->map_shared_view());
    guest.rng.emplace(std::move(rng.value()));
  }
  return {};
}

Result<void> World::suspend(const std::string& id, std::uint64_t tick) {
  Guest* guest = find_guest(id);
  if (guest == nullptr) return make_error(Errc::kNoSuchGuest, "unknown guest");
  std::size_t wiped = 0;
  for (auto& [pid, registry] : guest->processes) {
    wiped += registry->on_suspend().size();
  }
  guest->state = RunState::kSuspended;
  log_event(tick, id, event_kind_name(EventKind::kSuspend), guest->device->generation(),
            "wiped:" + std::to_string(wiped));
  return {};
}

Result<void> World::snapshot(const std::string& id, std::uint64_t tick) {
  Guest* guest = find_guest(id);
  if (guest == nullptr) return make_error(Errc::kNoSuchGuest, "unknown guest");
  if (guest->state != RunState::kSuspended) {
    return make_error(Errc::kGuestNotSuspended, "snapshot requires a suspended guest");
  }
  guest->latest_blob = build_blob(*guest);
  log_event(tick, id, event_kind_name(EventKind::kSnapshot), guest->device->generation(),
            "blob:" + std::to_string(guest->latest_blob->size()));
  return {};
}

Result<std::vector<std::string>> World::clone_restore(const std::string& id, int count,
                                                      std::uint64_t tick) {
  Guest* src = find_guest(id);
  if (src == nullptr) return make_error(Errc::kNoSuchGuest, "unknown guest");
  if (count < 1) return make_error(Errc::kSimError, "clone count must be >= 1");
  if (!src->latest_blob.has_value()) {
    return make_error(Errc::kSimError, "guest has no snapshot to clone");
  }
  const Bytes blob = *src->latest_blob;  // copy: clones must not share state
  std::vector<std::string> created;
  for (int i = 0; i < count; ++i) {
    const std::string clone_id = id + "." + std::to_string(src->next_clone_ordinal++);
    auto r = create_guest(clone_id, tick, &blob, config_.policy.bumps(EventKind::kCloneRestore),
                          id);
    if (!r.ok()) return r.error();
    Guest& clone = *guests_.at(clone_id);
    log_event(tick, clone_id, event_kind_name(EventKind::kCloneRestore),
              clone.device->generation(), "from:" + id);
    created.push_back(clone_id);
    src = find_guest(id);  // map may rebalance on insert
  }
  return created;
}

Result<std::string> World::plain_restore(const std::string& id, std::uint64_t tick) {
  Guest* src = find_guest(id);
  if (src == nullptr) return make_error(Errc::kNoSuchGuest, "unknown guest");
  if (!src->latest_blob.has_value()) {
    return make_error(Errc::kSimError, "guest has no snapshot to restore");
  }
  const Bytes blob = *src->latest_blob;
  const std::string new_id = id + ".p" + std::to_string(src->next_plain_ordinal++);
  auto r = create_guest(new_id, tick, &blob, config_.policy.bumps(EventKind::kPlainRestore),
                        id);
  if (!r.ok()) return r.error();
  log_event(tick, new_id, event_kind_name(EventKind::kPlainRestore),
            guests_.at(new_id)->device->generation(), "from:" + id);
  return new_id;
}

Result<void> World::resume(const std::string& id, std::uint64_t tick) {
  Guest* guest = find_guest(id);
  if (guest == nullptr) return make_error(Errc::kNoSuchGuest, "unknown guest");
  guest->state = RunState::kRunning;
  for (auto& [pid, registry] : guest->processes) registry->mark_running();
  if (config_.policy.bumps(EventKind::kResume)) {
    auto bumped = guest->device->backend_bump(next_uuid());
    if (!bumped.ok()) return bumped.error();
    for (WatcherActor& actor : guest->watchers) {
      if (actor.ack_delay.has_value()) actor.pending_ack_at = tick + *actor.ack_delay;
    }
  }
  log_event(tick, id, event_kind_name(EventKind::kResume), guest->device->generation(), "ok");
  return {};
}

Result<void> World::reboot(const std::string& id, std::uint64_t tick) {
  Guest* guest = find_guest(id);
  if (guest == nullptr) return make_error(Errc::kNoSuchGuest, "unknown guest");
  // Guest memory and processes restart; the device (host-backed) persists.
  // Watcher file handles die with their processes and fresh ones open.
  for (WatcherActor& actor : guest->watchers) {
    (void)guest->device->close_watcher(actor.handle);
  }
  guest->processes.clear();
  guest->processes[0] = std::make_unique<RegionRegistry>();
  guest->next_pid = 1;
  guest->cache_slots.clear();
  if (config_.policy.bumps(EventKind::kReboot)) {
    auto bumped = guest->device->backend_bump(next_uuid());
    if (!bumped.ok()) return bumped.error();
  }
  const SharedView view = guest->device->map_shared_view();
  std::span<const std::uint8_t> pers(
      reinterpret_cast<const std::uint8_t*>(id.data()), std::min<std::size_t>(id.size(), 32));
  auto rng = SnapsafeRng::instantiate(*guest->processes[0], *guest->entropy, pers,
                                      policy_for_mode(guest->rng_mode),
                                      detection_for_mode(guest->rng_mode), &view);
  if (!rng.ok()) return rng.error();
  guest->rng_region = rng.value().guard_region();
  guest->rng.emplace(std::move(rng.value()));
  for (WatcherActor& actor : guest->watchers) {
    actor.handle = guest->device->open_watcher();
    actor.pending_ack_at = std::nullopt;
  }
  guest->state = RunState::kRunning;
  log_event(tick, id, event_kind_name(EventKind::kReboot), guest->device->generation(), "ok");
  return {};
}

Result<void> World::pause(const std::string& id, std::uint64_t tick) {
  Guest* guest = find_guest(id);
  if (guest == nullptr) return make_error(Errc::kNoSuchGuest, "unknown guest");
  guest->state = RunState::kPaused;
  if (config_.policy.bumps(EventKind::kPause)) {
    auto bumped = guest->device->backend_bump(next_uuid());
    if (!bumped.ok()) return bumped.error();
  }
  log_event(tick, id, event_kind_name(EventKind::kPause), guest->device->generation(), "ok");
  return {};
}

Result<void> World::live_migrate(const std::string& id, std::uint64_t tick) {
  Guest* guest = find_guest(id);
  if (guest == nullptr) return make_error(Errc::kNoSuchGuest, "unknown guest");
  if (config_.policy.bumps(EventKind::kLiveMigrate)) {
    auto bumped = guest->device->backend_bump(next_uuid());
    if (!bumped.ok()) return bumped.error();
  }
  log_event(tick, id, event_kind_name(EventKind::kLiveMigrate),
            guest->device->generation(), "ok");
  return {};
}

Result<std::uint64_t> World::fork_process(const std::string& id, std::uint64_t pid,
                                          std::uint64_t tick) {
  Guest* guest = find_guest(id);
  if (guest == nullptr) return make_error(Errc::kNoSuchGuest, "unknown guest");
  auto parent = guest->processes.find(pid);
  if (parent == guest->processes.end()) {
    return make_error(Errc::kNoSuchProcess, "unknown pid");
  }
  const std::uint64_t child_pid = guest->next_pid++;
  auto child = std::make_unique<RegionRegistry>(parent->second->on_fork());
  std::size_t wiped = 0;
  for (RegionId rid : child->region_ids()) {
    if (child->policy(rid)->wipe_on_fork) ++wiped;
  }
  guest->processes.emplace(child_pid, std::move(child));
  if (config_.policy.bumps(EventKind::kFork)) {
    auto bumped = guest->device->backend_bump(next_uuid());
    if (!bumped.ok()) return bumped.error();
  }
  log_event(tick, id, event_kind_name(EventKind::kFork), guest->device->generation(),
            "pid:" + std::to_string(child_pid) + ",wiped:" + std::to_string(wiped));
  return child_pid;
}

void World::catch_up_watchers(Guest& guest, std::uint64_t tick) {
  for (WatcherActor& actor : guest.watchers) {
    if (actor.pending_ack_at.has_value() && *actor.pending_ack_at <= tick) {
      (void)guest.device->acknowledge(actor.handle, guest.device->generation());
      actor.pending_ack_at = std::nullopt;
      if (guest.rng_mode == RngMode::kWatcher && guest.rng.has_value()) {
        (void)guest.rng->reseed();
      }
    }
  }
}

Result<void> World::deliver_invoke(Guest& guest, std::uint64_t tick) {
  log_event(tick, guest.id, event_kind_name(EventKind::kInvoke),
            guest.device->generation(), "deliver");
  std::uint64_t clock = tick;
  for (const HandlerOp& op : guest.handler) {
    switch (op.kind) {
      case HandlerOp::Kind::kSleep:
        clock += op.count;
        break;
      case HandlerOp::Kind::kDrawNonce: {
        for (std::uint64_t i = 0; i < op.count; ++i) {
          auto nonce = guest.rng->next_nonce();
          if (!nonce.ok()) return nonce.error();
          const Block16& value = nonce.value();
          emissions_.push_back(Emission{clock, guest.id,
                                        Bytes(value.begin(), value.end()), true});
          log_event(clock, guest.id, event_kind_name(EventKind::kInvoke),
                    guest.device->generation(), "nonce:" + hex_encode(value));
        }
        break;
      }
      case HandlerOp::Kind::kDrawBytes: {
        Bytes buf(op.count);
        if (auto r = guest.rng->generate(buf); !r.ok()) return r;
        emissions_.push_back(Emission{clock, guest.id, buf, false});
        log_event(clock, guest.id, event_kind_name(EventKind::kInvoke),
                  guest.device->generation(), "bytes:" + hex_encode(buf));
        break;
      }
      case HandlerOp::Kind::kCacheNonce: {
        auto nonce = guest.rng->next_nonce();
        if (!nonce.ok()) return nonce.error();
        guest.cache_slots[op.slot] = nonce.value();
        log_event(clock, guest.id, event_kind_name(EventKind::kInvoke),
                  guest.device->generation(),
                  "cache:" + op.slot + ":" + hex_encode(nonce.value()));
        break;
      }
      case HandlerOp::Kind::kEmitCached: {
        auto it = guest.cache_slots.find(op.slot);
        if (it == guest.cache_slots.end()) {
          log_event(clock, guest.id, event_kind_name(EventKind::kInvoke),
                    guest.device->generation(), "error:EmptySlot");
          break;
        }
        emissions_.push_back(Emission{clock, guest.id,
                                      Bytes(it->second.begin(), it->second.end()), true});
        log_event(clock, guest.id, event_kind_name(EventKind::kInvoke),
                  guest.device->generation(),
                  "emit:" + op.slot + ":" + hex_encode(it->second));
        break;
      }
    }
  }
  return {};
}

Result<void> World::invoke(const std::string& id, bool fenced, std::uint64_t tick) {
  Guest* guest = find_guest(id);
  if (guest == nullptr) return make_error(Errc::kNoSuchGuest, "unknown guest");
  if (guest->state != RunState::kRunning) {
    return make_error(Errc::kSimError, "invoke on a guest that is not running");
  }
  catch_up_watchers(*guest, tick);
  std::uint64_t delivery = tick;
  if (fenced) {
    if (guest->device->count_outdated_watchers() > 0) {
      std::uint64_t latest = tick;
      bool all_will_ack = true;
      for (const WatcherActor& actor : guest->watchers) {
        if (!actor.pending_ack_at.has_value()) continue;
        latest = std::max(latest, *actor.pending_ack_at);
      }
      // Any outdated handle with no scheduled ack never quiesces.
      catch_up_watchers(*guest, latest);
      if (guest->device->count_outdated_watchers() > 0) all_will_ack = false;
      if (!all_will_ack) {
        log_event(tick + config_.fence_bound, id, event_kind_name(EventKind::kInvoke),
                  guest->device->generation(), "error:FenceTimeout");
        return {};
      }
      delivery = latest;
    }
  }
  return deliver_invoke(*guest, delivery);
}

Result<void> World::run_schedule(std::span<const SimEvent> events) {
  std::vector<SimEvent> ordered(events.begin(), events.end());
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const SimEvent& a, const SimEvent& b) { return a.tick < b.tick; });

  for (const SimEvent& event : ordered) {
    if (event.kind == EventKind::kBoot) {
      if (auto r = boot(event.target, event.tick); !r.ok()) {
        log_error(event.tick, event.target, event.kind, r.error());
      }
      continue;
    }
    const std::vector<std::string> targets = expand_targets(event.target);
    if (targets.empty()) {
      log_error(event.tick, event.target, event.kind,
                make_error(Errc::kNoSuchGuest, "no guest matches target"));
      continue;
    }
    for (const std::string& id : targets) {
      Result<void> r = {};
      switch (event.kind) {
        case EventKind::kBoot:
          break;  // handled above
        case EventKind::kSuspend:
          r = suspend(id, event.tick);
          break;
        case EventKind::kSnapshot:
          r = snapshot(id, event.tick);
          break;
        case EventKind::kCloneRestore: {
          std::uint64_t count = 1;
          if (!event.args.empty() && !parse_u64(event.args[0], count)) {
            r = make_error(Errc::kSimError, "bad clone count");
          } else {
            auto c = clone_restore(id, static_cast<int>(count), event.tick);
            if (!c.ok()) r = c.error();
          }
          break;
        }
        case EventKind::kPlainRestore: {
          auto c = plain_restore(id, event.tick);
          if (!c.ok()) r = c.error();
          break;
        }
        case EventKind::kResume:
          r = resume(id, event.tick);
          break;
        case EventKind::kFork: {
          std::uint64_t pid = 0;
          if (!event.args.empty() && !parse_u64(event.args[0], pid)) {
            r = make_error(Errc::kSimError, "bad pid");
          } else {
            auto f = fork_process(id, pid, event.tick);
            if (!f.ok()) r = f.error();
          }
          break;
        }
        case EventKind::kReboot:
          r = reboot(id, event.tick);
          break;
        case EventKind::kPause:
          r = pause(id, event.tick);
          break;
        case EventKind::kLiveMigrate:
          r = live_migrate(id, event.tick);
          break;
        case EventKind::kInvoke: {
          const bool fenced = event.args.empty() || event.args[0] != "unfenced";
          r = invoke(id, fenced, event.tick);
          break;
        }
        case EventKind::kFence: {
          Guest* guest = find_guest(id);
          if (guest == nullptr) {
            r = make_error(Errc::kNoSuchGuest, "unknown guest");
            break;
          }
          catch_up_watchers(*guest, event.tick);
          std::uint64_t latest = event.tick;
          for (const WatcherActor& actor : guest->watchers) {
            if (actor.pending_ack_at.has_value()) {
              latest = std::max(latest, *actor.pending_ack_at);
            }
          }
          catch_up_watchers(*guest, latest);
          if (guest->device->count_outdated_watchers() > 0) {
            log_event(event.tick + config_.fence_bound, id,
                      event_kind_name(EventKind::kFence), guest->device->generation(),
                      "error:FenceTimeout");
          } else {
            log_event(latest, id, event_kind_name(EventKind::kFence),
                      guest->device->generation(),
                      "waited:" + std::to_string(latest - event.tick));
          }
          break;
        }
      }
      if (!r.ok()) log_error(event.tick, id, event.kind, r.error());
    }
  }
  return {};
}

std::uint32_t World::guest_generation(const std::string& id) const {
  const Guest* guest = find_guest(id);
  return guest == nullptr ? 0 : guest->device->generation();
}

std::vector<std::string> World::guests_in_creation_order() const {
  std::vector<const Guest*> all;
  all.reserve(guests_.size());
  for (const auto& [id, guest] : guests_) all.push_back(guest.get());
  std::sort(all.begin(), all.end(), [](const Guest* a, const Guest* b) {
    return a->creation_index < b->creation_index;
  });
  std::vector<std::string> ids;
  ids.reserve(all.size());
  for (const Guest* g : all) ids.push_back(g->id);
  return ids;
}

std::vector<std::string> World::expand_targets(std::string_view pattern) const {
  std::vector<std::string> out;
  for (const std::string& id : guests_in_creation_order()) {
    if (glob_match(pattern, id)) out.push_back(id);
  }
  return out;
}

std::optional<World::GuestView> World::inspect(const std::string& id) const {
  const Guest* guest = find_guest(id);
  if (guest == nullptr) return std::nullopt;
  GuestView view;
  view.registry = guest->processes.at(0).get();
  view.device = guest->device.get();
  view.rng = guest->rng.has_value() ? &*guest->rng : nullptr;
  view.rng_mode = guest->rng_mode;
  view.running = guest->state == RunState::kRunning;
  view.latest_blob = guest->latest_blob.has_value() ? &*guest->latest_blob : nullptr;
  return view;
}

}  // namespace snapsafe
