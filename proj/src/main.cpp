#include <cstdint>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "snapsafe/bench.hpp"
#include "snapsafe/feature_matrix.hpp"
#include "snapsafe/scenario.hpp"
#include "snapsafe/uniqueness.hpp"
#include "snapsafe/vm_sim.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitParseError = 2;
constexpr int kExitSimError = 3;

int cmd_run(const std::string& path, bool seed_given, std::uint64_t seed_override) {
  auto scenario = snapsafe::load_scenario_file(path);
  if (!scenario.ok()) {
    std::cerr << "error: " << scenario.error().message << "\n";
    return kExitParseError;
  }
  snapsafe::Scenario& s = scenario.value();
  const std::uint64_t seed = seed_given ? seed_override : s.seed;

  snapsafe::World world(seed, s.config);
  if (auto r = world.run_schedule(s.schedule); !r.ok()) {
    std::cerr << "error: " << r.error().message << "\n";
    return kExitSimError;
  }

  // The event log goes to stdout so it can be piped straight into `check`;
  // the uniqueness report goes to stderr.
  std::cout << world.log().render();
  const snapsafe::UniquenessReport report = snapsafe::check_uniqueness(world.emissions());
  std::cerr << report.render();

  const bool expected_unique = s.expect == snapsafe::Scenario::Expectation::kUnique;
  if (report.unique() != expected_unique) {
    std::cerr << "verdict mismatch: expected " << expectation_name(s.expect) << "\n";
    return kExitSimError;
  }
  std::cerr << "verdict matches expectation (" << expectation_name(s.expect) << ")\n";
  return kExitOk;
}

int cmd_check(const std::string& path) {
  auto text = snapsafe::read_text_file(path);
  if (!text.ok()) {
    std::cerr << "error: " << text.error().message << "\n";
    return kExitParseError;
  }
  auto emissions = snapsafe::parse_emissions_from_log(text.value());
  if (!emissions.ok()) {
    std::cerr << "error: " << emissions.error().message << "\n";
    return kExitParseError;
  }
  std::cout << snapsafe::check_uniqueness(emissions.value()).render();
  return kExitOk;
}

int cmd_bench(const std::string& workload, bool no_guard, std::uint64_t iters,
              const std::string& entropy, std::uint64_t seed) {
  if (iters == 0) {  // per-workload defaults
    if (workload == "increment") {
      iters = 1'000'000;
    } else if (workload == "drbg") {
      iters = 150'000;
    } else {
      iters = 30'000;
    }
  }
  auto report = snapsafe::run_bench(workload, !no_guard, iters, entropy, seed);
  if (!report.ok()) {
    std::cerr << "error: " << report.error().message << "\n";
    return kExitParseError;
  }
  std::cout << report.value().render();
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"microVM clone-safety simulator: scenario runner, nonce-uniqueness "
               "checker, micro-benchmarks and mechanism feature matrix"};
  app.require_subcommand(1);
  app.footer("exit codes: 0 success / verdict matches, 2 parse or usage error, "
             "3 simulation error or verdict mismatch");

  std::uint64_t seed = 0;
  CLI::Option* seed_opt = app.add_option("--seed", seed, "world seed override");

  std::string scenario_path;
  CLI::App* run = app.add_subcommand("run", "run a scenario file and check uniqueness");
  run->add_option("scenario", scenario_path, "scenario file path")->required();

  std::string log_path;
  CLI::App* check = app.add_subcommand("check", "check an event log for duplicate nonces");
  check->add_option("log", log_path, "event log file path")->required();

  std::string workload;
  bool no_guard = false;
  std::uint64_t iters = 0;
  std::string entropy = "sys";
  CLI::App* bench = app.add_subcommand("bench", "micro-benchmarks (non-deterministic)");
  bench->add_option("workload", workload, "increment | drbg | reseed")->required();
  bench->add_flag("--no-guard", no_guard, "measure only the raw arm");
  bench->add_option("--iters", iters, "total iterations per arm");
  bench->add_option("--entropy", entropy, "reseed entropy source: sys | test");

  CLI::App* matrix = app.add_subcommand("matrix", "mechanism-by-feature comparison table");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitParseError;
  }

  if (run->parsed()) {
    return cmd_run(scenario_path, seed_opt->count() > 0, seed);
  }
  if (check->parsed()) {
    return cmd_check(log_path);
  }
  if (bench->parsed()) {
    return cmd_bench(workload, no_guard, iters, entropy, seed);
  }
  if (matrix->parsed()) {
    std::cout << snapsafe::build_feature_matrix(seed).render();
    return kExitOk;
  }
  return kExitParseError;
}
