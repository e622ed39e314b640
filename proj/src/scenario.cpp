#include "snapsafe/scenario.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace snapsafe {

namespace {

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

bool parse_u64_token(std::string_view text, std::uint64_t& out) {
  const char* end = text.data() + text.size();
  auto [p, ec] = std::from_chars(text.data(), end, out);
  return ec == std::errc() && p == end;
}

Error parse_fail(std::size_t line_no, const std::string& what) {
  return make_error(Errc::kParseError,
                    "line " + std::to_string(line_no) + ": " + what);
}

constexpr EventKind kAllKinds[] = {
    EventKind::kBoot,         EventKind::kSuspend,     EventKind::kSnapshot,
    EventKind::kCloneRestore, EventKind::kPlainRestore, EventKind::kResume,
    EventKind::kFork,         EventKind::kReboot,       EventKind::kPause,
    EventKind::kLiveMigrate,  EventKind::kInvoke,       EventKind::kFence,
};

std::string_view policy_token(EventKind kind) {
  switch (kind) {
    case EventKind::kBoot: return "boot";
    case EventKind::kSuspend: return "suspend";
    case EventKind::kSnapshot: return "snapshot";
    case EventKind::kCloneRestore: return "clone";
    case EventKind::kPlainRestore: return "plain_restore";
    case EventKind::kResume: return "resume";
    case EventKind::kFork: return "fork";
    case EventKind::kReboot: return "reboot";
    case EventKind::kPause: return "pause";
    case EventKind::kLiveMigrate: return "live_migrate";
    case EventKind::kInvoke: return "invoke";
    case EventKind::kFence: return "fence";
  }
  return "unknown";
}

}  // namespace

std::string_view expectation_name(Scenario::Expectation e) {
  return e == Scenario::Expectation::kUnique ? "unique" : "duplicates";
}

Result<Scenario> parse_scenario(std::string_view text) {
  Scenario scenario;
  bool saw_header = false;

  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t eol = std::min(text.find('\n', pos), text.size());
    std::string_view line = text.substr(pos, eol - pos);
    ++line_no;
    const bool last = eol == text.size();
    pos = eol + 1;

    if (const std::size_t hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    const std::vector<std::string_view> tok = split_ws(line);
    if (tok.empty()) {
      if (last) break;
      continue;
    }

    if (!saw_header) {
      if (tok.size() != 2 || tok[0] != "scenario" || tok[1] != "v1") {
        return parse_fail(line_no, "expected header 'scenario v1'");
      }
      saw_header = true;
      if (last) break;
      continue;
    }

    const std::string_view directive = tok[0];
    if (directive == "name") {
      if (tok.size() != 2) return parse_fail(line_no, "name takes one token");
      scenario.name = std::string(tok[1]);
    } else if (directive == "seed") {
      if (tok.size() != 2 || !parse_u64_token(tok[1], scenario.seed)) {
        return parse_fail(line_no, "seed takes one unsigned integer");
      }
    } else if (directive == "expect") {
      if (tok.size() != 2) return parse_fail(line_no, "expect takes one token");
      if (tok[1] == "unique") {
        scenario.expect = Scenario::Expectation::kUnique;
      } else if (tok[1] == "duplicates") {
        scenario.expect = Scenario::Expectation::kDuplicates;
      } else {
        return parse_fail(line_no, "expect must be unique or duplicates");
      }
    } else if (directive == "fence_bound") {
      if (tok.size() != 2 || !parse_u64_token(tok[1], scenario.config.fence_bound)) {
        return parse_fail(line_no, "fence_bound takes one unsigned integer");
      }
    } else if (directive == "policy") {
      if (tok.size() != 3) return parse_fail(line_no, "policy takes <kind> bump|nobump");
      const std::optional<EventKind> kind = parse_event_kind(tok[1]);
      if (!kind.has_value()) return parse_fail(line_no, "unknown event kind");
      if (tok[2] == "bump") {
        scenario.config.policy.set(*kind, true);
      } else if (tok[2] == "nobump") {
        scenario.config.policy.set(*kind, false);
      } else {
        return parse_fail(line_no, "policy value must be bump or nobump");
      }
    } else if (directive == "rngmode") {
      if (tok.size() != 3) return parse_fail(line_no, "rngmode takes <glob> <mode>");
      const std::optional<RngMode> mode = parse_rng_mode(tok[2]);
      if (!mode.has_value()) {
        return parse_fail(line_no, "rng mode must be guard, view or watcher");
      }
      scenario.config.rng_mode_rules.emplace_back(std::string(tok[1]), *mode);
    } else if (directive == "watcher") {
      if (tok.size() != 3) return parse_fail(line_no, "watcher takes <glob> <delay>|never");
      std::optional<std::uint64_t> delay;
      if (tok[2] != "never") {
        std::uint64_t value = 0;
        if (!parse_u64_token(tok[2], value)) {
          return parse_fail(line_no, "watcher delay must be an integer or 'never'");
        }
        delay = value;
      }
      scenario.config.watcher_rules.emplace_back(std::string(tok[1]), delay);
    } else if (directive == "handler") {
      if (tok.size() != 3) return parse_fail(line_no, "handler takes <glob> <program>");
      auto program = parse_handler_program(tok[2]);
      if (!program.ok()) {
        return parse_fail(line_no, program.error().message);
      }
      scenario.config.handler_rules.emplace_back(std::string(tok[1]),
                                                 std::move(program.value()));
    } else if (directive == "event") {
      if (tok.size() < 4) return parse_fail(line_no, "event takes <tick> <kind> <target> [args]");
      SimEvent event;
      if (!parse_u64_token(tok[1], event.tick)) {
        return parse_fail(line_no, "event tick must be an unsigned integer");
      }
      const std::optional<EventKind> kind = parse_event_kind(tok[2]);
      if (!kind.has_value()) return parse_fail(line_no, "unknown event kind");
      event.kind = *kind;
      event.target = std::string(tok[3]);
      for (std::size_t i = 4; i < tok.size(); ++i) {
        event.args.emplace_back(tok[i]);
      }
      scenario.schedule.push_back(std::move(event));
    } else {
      return parse_fail(line_no, "unknown directive '" + std::string(directive) + "'");
    }
    if (last) break;
  }

  if (!saw_header) {
    return make_error(Errc::kParseError, "empty scenario: missing 'scenario v1' header");
  }
  return scenario;
}

std::string render_scenario(const Scenario& scenario) {
  std::ostringstream out;
  out << "scenario v1\n";
  out << "name " << scenario.name << "\n";
  out << "seed " << scenario.seed << "\n";
  out << "expect " << expectation_name(scenario.expect) << "\n";
  out << "fence_bound " << scenario.config.fence_bound << "\n";

  const PolicyTable defaults = PolicyTable::defaults();
  for (EventKind kind : kAllKinds) {
    if (scenario.config.policy.bumps(kind) != defaults.bumps(kind)) {
      out << "policy " << policy_token(kind) << " "
          << (scenario.config.policy.bumps(kind) ? "bump" : "nobump") << "\n";
    }
  }
  for (const auto& [glob, mode] : scenario.config.rng_mode_rules) {
    out << "rngmode " << glob << " " << rng_mode_name(mode) << "\n";
  }
  for (const auto& [glob, delay] : scenario.config.watcher_rules) {
    out << "watcher " << glob << " ";
    if (delay.has_value()) {
      out << *delay;
    } else {
      out << "never";
    }
    out << "\n";
  }
  for (const auto& [glob, program] : scenario.config.handler_rules) {
    out << "handler " << glob << " " << render_handler_program(program) << "\n";
  }
  for (const SimEvent& event : scenario.schedule) {
    out << "event " << event.tick << " " << policy_token(event.kind) << " "
        << event.target;
    for (const std::string& arg : event.args) out << " " << arg;
    out << "\n";
  }
  return out.str();
}

Result<std::string> read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    return make_error(Errc::kIoError, "cannot open '" + path + "'");
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  if (in.bad()) {
    return make_error(Errc::kIoError, "read failed for '" + path + "'");
  }
  return buffer.str();
}

Result<Scenario> load_scenario_file(const std::string& path) {
  auto text = read_text_file(path);
  if (!text.ok()) return text.error();
  auto scenario = parse_scenario(text.value());
  if (!scenario.ok()) {
    return make_error(scenario.error().code, path + ": " + scenario.error().message);
  }
  return scenario;
}

}  // namespace snapsafe
