#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "snapsafe/result.hpp"
#include "snapsafe/vm_sim.hpp"

namespace snapsafe {

// A parsed scenario file: a seeded world configuration plus an event
// schedule and the outcome the author expects the uniqueness checker to
// report. Canonical text form round-trips through parse/render.
struct Scenario {
  enum class Expectation { kUnique, kDuplicates };

  std::string name = "unnamed";
  std::uint64_t seed = 0;
  Expectation expect = Expectation::kUnique;
  World::Config config;
  std::vector<SimEvent> schedule;
};

std::string_view expectation_name(Scenario::Expectation e);

// Line-oriented DSL, one directive per line. '#' starts a comment; blank
// lines are ignored. The first directive must be the version header.
//
//   scenario v1
//   name <token>
//   seed <u64>
//   expect unique|duplicates
//   fence_bound <ticks>
//   policy <kind> bump|nobump
//   rngmode <glob> guard|view|watcher
//   watcher <glob> <ack-delay>|never
//   handler <glob> <op[,op...]>      ops: nonce:k bytes:k sleep:t cache:s emit:s
//   event <tick> <kind> <target> [args...]
Result<Scenario> parse_scenario(std::string_view text);

// Canonical rendering: version header, name, seed, expect, fence_bound,
// non-default policy rows, then rule and event lines in declaration order.
// parse(render(s)) reproduces s exactly.
std::string render_scenario(const Scenario& scenario);

Result<Scenario> load_scenario_file(const std::string& path);
Result<std::string> read_text_file(const std::string& path);

}  // namespace snapsafe
