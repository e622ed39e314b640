#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "snapsafe/bytes.hpp"
#include "snapsafe/entropy.hpp"
#include "snapsafe/gen_device.hpp"
#include "snapsafe/guard_memory.hpp"
#include "snapsafe/result.hpp"
#include "snapsafe/snapsafe_rng.hpp"

namespace snapsafe {

enum class EventKind {
  kBoot,
  kSuspend,
  kSnapshot,
  kCloneRestore,
  kPlainRestore,
  kResume,
  kFork,
  kReboot,
  kPause,
  kLiveMigrate,
  kInvoke,
  kFence,
};

std::string_view event_kind_name(EventKind kind);
std::optional<EventKind> parse_event_kind(std::string_view name);

// Which lifecycle events change the system generation. Explicit data, not
// code: scenarios may override rows. By default only a clone-restore bumps;
// reboot, pause, resume, live migration and plain restore do not.
class PolicyTable {
 public:
  static PolicyTable defaults();

  bool bumps(EventKind kind) const { return bump_[static_cast<std::size_t>(kind)]; }
  void set(EventKind kind, bool bumps) { bump_[static_cast<std::size_t>(kind)] = bumps; }

  friend bool operator==(const PolicyTable&, const PolicyTable&) = default;

 private:
  std::array<bool, 12> bump_{};
};

struct SimEvent {
  std::uint64_t tick = 0;
  EventKind kind = EventKind::kBoot;
  std::string target;                  // guest id or glob pattern
  std::vector<std::string> args;
};

// Handler vocabulary: enough to express generation/use hazards without a
// scripting language. `cache`/`emit` deliberately model application code
// that stores a value in one request and uses it in a later one.
struct HandlerOp {
  enum class Kind { kDrawNonce, kDrawBytes, kSleep, kCacheNonce, kEmitCached };
  Kind kind;
  std::uint64_t count = 1;   // nonce/bytes count, sleep ticks
  std::string slot;          // cache/emit slot name
};
using HandlerProgram = std::vector<HandlerOp>;

Result<HandlerProgram> parse_handler_program(std::string_view text);
std::string render_handler_program(const HandlerProgram& program);

// Glob matching for guest ids: '*' = any run of non-dot characters,
// '?' = one non-dot character. Dots separate lineage segments, so
// "root.*" addresses first-level clones only.
bool glob_match(std::string_view pattern, std::string_view id);

struct LogRecord {
  std::uint64_t tick = 0;
  std::string guest;
  std::string event;
  std::uint32_t gen = 0;
  std::string detail;

  std::string render() const;
};

struct EventLog {
  std::vector<LogRecord> records;

  std::string render() const;
};

struct Emission {
  std::uint64_t tick = 0;
  std::string guest;
  Bytes value;
  bool is_nonce = true;
};

struct CloneTreeNode {
  std::string parent;  // empty for roots
  std::vector<std::string> children;
  std::uint64_t created_tick = 0;
};

// How a guest's RNG is wired to the uniqueness mechanisms.
enum class RngMode {
  kGuardPage,   // wipe-on-fork + wipe-on-suspend page, self-check
  kViewOnly,    // no wipes; detection via the mapped generation view
  kWatcher,     // no wipes, no self-check; reseed driven by watcher acks
};

std::string_view rng_mode_name(RngMode mode);
std::optional<RngMode> parse_rng_mode(std::string_view name);

// Deterministic discrete-event world. Identical (seed, schedule, config)
// triples replay to byte-identical logs.
class World {
 public:
  struct Config {
    PolicyTable policy = PolicyTable::defaults();
    std::uint64_t fence_bound = 1000;  // ticks before a fence times out
    // Ordered rules matched against each new guest id; last match wins.
    std::vector<std::pair<std::string, HandlerProgram>> handler_rules;
    std::vector<std::pair<std::string, std::optional<std::uint64_t>>> watcher_rules;
    std::vector<std::pair<std::string, RngMode>> rng_mode_rules;
  };

  explicit World(std::uint64_t seed) : World(seed, Config()) {}
  World(std::uint64_t seed, Config config);

  Result<void> run_schedule(std::span<const SimEvent> events);

  const EventLog& log() const { return log_; }
  const std::vector<Emission>& emissions() const { return emissions_; }
  const std::map<std::string, CloneTreeNode>& clone_tree() const { return tree_; }

  // Individual lifecycle operations (run_schedule drives these; tests may
  // call them directly).
  Result<void> boot(const std::string& id, std::uint64_t tick);
  Result<void> suspend(const std::string& id, std::uint64_t tick);
  Result<void> snapshot(const std::string& id, std::uint64_t tick);
  Result<std::vector<std::string>> clone_restore(const std::string& id, int count,
                                                 std::uint64_t tick);
  Result<std::string> plain_restore(const std::string& id, std::uint64_t tick);
  Result<void> resume(const std::string& id, std::uint64_t tick);
  Result<void> reboot(const std::string& id, std::uint64_t tick);
  Result<void> pause(const std::string& id, std::uint64_t tick);
  Result<void> live_migrate(const std::string& id, std::uint64_t tick);
  Result<std::uint64_t> fork_process(const std::string& id, std::uint64_t pid,
                                     std::uint64_t tick);
  Result<void> invoke(const std::string& id, bool fenced, std::uint64_t tick);

  bool guest_exists(const std::string& id) const { return guests_.count(id) != 0; }
  std::uint32_t guest_generation(const std::string& id) const;
  std::vector<std::string> guests_in_creation_order() const;
  std::vector<std::string> expand_targets(std::string_view pattern) const;

  // Read-only peek at a guest's internals for tests.
  struct GuestView {
    const RegionRegistry* registry;
    const SysGenDevice* device;
    const SnapsafeRng* rng;
    RngMode rng_mode;
    bool running;
    const Bytes* latest_blob;
  };
  std::optional<GuestView> inspect(const std::string& id) const;

 private:
  struct WatcherActor {
    WatcherId handle = 0;
    std::optional<std::uint64_t> ack_delay;       // nullopt: never acks
    std::optional<std::uint64_t> pending_ack_at;  // set when a bump is outstanding
  };

  enum class RunState { kRunning, kSuspended, kPaused };

  struct Guest {
    std::string id;
    std::uint64_t created_tick = 0;
    std::uint64_t creation_index = 0;
    RunState state = RunState::kRunning;
    std::unique_ptr<SysGenDevice> device;
    // pid 0 is the main process; fork appends children.
    std::map<std::uint64_t, std::unique_ptr<RegionRegistry>> processes;
    std::uint64_t next_pid = 1;
    std::unique_ptr<DeterministicEntropy> entropy;
    std::optional<SnapsafeRng> rng;
    RegionId rng_region = 0;
    RngMode rng_mode = RngMode::kGuardPage;
    HandlerProgram handler;
    std::vector<WatcherActor> watchers;
    std::map<std::string, Block16> cache_slots;
    std::optional<Bytes> latest_blob;
    std::uint64_t next_clone_ordinal = 1;
    std::uint64_t next_plain_ordinal = 1;
  };

  Guest* find_guest(const std::string& id);
  const Guest* find_guest(const std::string& id) const;

  VmGenUuid next_uuid();
  Result<void> create_guest(const std::string& id, std::uint64_t tick,
                            const Bytes* blob, bool bump, const std::string& parent);
  void apply_rules(Guest& guest);
  // Applies all watcher acks that fall due at or before `tick`.
  void catch_up_watchers(Guest& guest, std::uint64_t tick);
  Result<void> deliver_invoke(Guest& guest, std::uint64_t tick);

  Bytes build_blob(Guest& guest) const;
  Result<void> restore_from_blob(Guest& guest, const Bytes& blob, bool bump,
                                 std::uint64_t tick);

  void log_event(std::uint64_t tick, const std::string& guest, std::string_view event,
                 std::uint32_t gen, std::string detail);
  void log_error(std::uint64_t tick, const std::string& guest, EventKind kind,
                 const Error& error);

  std::uint64_t seed_;
  Config config_;
  DeterministicEntropy uuid_stream_;
  std::map<std::string, std::unique_ptr<Guest>> guests_;
  std::uint64_t next_creation_index_ = 0;
  EventLog log_;
  std::vector<Emission> emissions_;
  std::map<std::string, CloneTreeNode> tree_;
};

}  // namespace snapsafe
