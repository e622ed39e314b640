#include "snapsafe/bench.hpp"

#include <sched.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <vector>

#include "snapsafe/ctr_drbg.hpp"
#include "snapsafe/entropy.hpp"
#include "snapsafe/gen_device.hpp"
#include "snapsafe/guard_memory.hpp"
#include "snapsafe/snapsafe_rng.hpp"

namespace snapsafe {

namespace {

template <typename T>
inline void do_not_optimize(const T& value) {
  asm volatile("" : : "g"(&value) : "memory");
}

double median_of(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  if (n == 0) return 0.0;
  return n % 2 == 1 ? values[n / 2] : (values[n / 2 - 1] + values[n / 2]) / 2.0;
}

double mad_of(const std::vector<double>& values, double median) {
  std::vector<double> dev;
  dev.reserve(values.size());
  for (double v : values) dev.push_back(std::fabs(v - median));
  return median_of(std::move(dev));
}

using Clock = std::chrono::steady_clock;

double ns_per_op(Clock::time_point begin, Clock::time_point end, std::uint64_t ops) {
  const auto ns = std::chrono::duration_cast<std::chrono::nanoseconds>(end - begin);
  return static_cast<double>(ns.count()) / static_cast<double>(ops);
}

bool pin_to_current_cpu() {
  const int cpu = sched_getcpu();
  if (cpu < 0) return false;
  cpu_set_t set;
  CPU_ZERO(&set);
  CPU_SET(cpu, &set);
  return sched_setaffinity(0, sizeof(set), &set) == 0;
}

// One measured batch per arm, guarded first, repeated `batches` times.
// `warmed` arms run once unmeasured before the first batch.
struct ArmSamples {
  std::vector<double> guarded;
  std::vector<double> unguarded;
};

// The raw counterpart of the guarded DRBG path: identical page traffic
// (state load before, state store after) with the staleness check elided,
// so the measured difference isolates the check itself.
class RawPageDrbg {
 public:
  explicit RawPageDrbg(EntropySource& entropy) {
    auto drbg = CtrDrbg::instantiate(entropy, {});
    store(drbg.value());
  }

  void generate(std::span<std::uint8_t> out) {
    CtrDrbg drbg = load();
    (void)drbg.generate(out);
    store(drbg);
  }

  void reseed(EntropySource& entropy) {
    CtrDrbg drbg = load();
    (void)drbg.reseed(entropy);
    store(drbg);
  }

  // Unguarded nonce baseline: a counter the application keeps in ordinary
  // memory and bumps with no staleness check at all.
  void next_nonce(Block16& out) {
    counter_.increment();
    out = counter_.to_bytes();
  }

 private:
  CtrDrbg load() const {
    CtrDrbg::State state;
    std::memcpy(state.key.data(), page_ + 8, state.key.size());
    std::memcpy(state.v.data(), page_ + 24, state.v.size());
    state.reseed_counter = load_le64(page_ + 40);
    return CtrDrbg::from_state(state);
  }
  void store(const CtrDrbg& drbg) {
    const CtrDrbg::State& state = drbg.state();
    std::memcpy(page_ + 8, state.key.data(), state.key.size());
    std::memcpy(page_ + 24, state.v.data(), state.v.size());
    store_le64(page_ + 40, state.reseed_counter);
  }

  alignas(64) std::uint8_t page_[4096] = {};
  U128 counter_;
};

}  // namespace

std::string BenchReport::render() const {
  std::string out;
  const auto line = [&](const std::string& key, const std::string& value) {
    out += key + " " + value + "\n";
  };
  const auto num = [](double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.3f", v);
    return std::string(buf);
  };
  line("workload", workload);
  line("iterations", std::to_string(iterations));
  line("batches", std::to_string(batches));
  if (with_guard) {
    line("guarded_ns_per_op", num(guarded_ns) + " mad " + num(guarded_mad));
  }
  line("unguarded_ns_per_op", num(unguarded_ns) + " mad " + num(unguarded_mad));
  if (with_guard) line("ratio", num(ratio));
  line("notes", notes.empty() ? "-" : notes);
  return out;
}

Result<BenchReport> run_bench(std::string_view workload, bool with_guard,
                              std::uint64_t iters, std::string_view entropy_kind,
                              std::uint64_t seed) {
  if (iters == 0) return make_error(Errc::kUsageError, "iterations must be positive");
  if (workload != "increment" && workload != "drbg" && workload != "reseed") {
    return make_error(Errc::kUsageError,
                      "workload must be increment, drbg or reseed");
  }
  if (entropy_kind != "sys" && entropy_kind != "test") {
    return make_error(Errc::kUsageError, "entropy source must be sys or test");
  }

  BenchReport report;
  report.workload = std::string(workload);
  report.with_guard = with_guard;
  report.notes = "numbers are hardware-dependent and non-deterministic";
  report.notes += pin_to_current_cpu() ? "; pinned to one cpu" : "; unpinned";

  if (workload == "increment" && iters < 1'000'000) {
    iters = 1'000'000;
    report.notes += "; iterations raised to the 10^6 minimum";
  }
  const std::size_t batches = 30;
  const std::uint64_t ops_per_batch = std::max<std::uint64_t>(1, iters / batches);
  report.iterations = ops_per_batch * batches;
  report.batches = batches;

  SystemEntropy sys_entropy;
  DeterministicEntropy test_entropy(seed, "bench");
  EntropySource& entropy =
      entropy_kind == "sys" ? static_cast<EntropySource&>(sys_entropy)
                            : static_cast<EntropySource&>(test_entropy);

  // Guarded arm setup: a real RNG in a real guarded page with a generation
  // view attached (the full deployed check: marker plus epoch), wired to
  // the selected entropy source (only the reseed workload pulls per op).
  RegionRegistry registry;
  DeterministicEntropy uuid_entropy(seed, "bench/uuid");
  VmGenUuid uuid;
  (void)uuid_entropy.fill(uuid.bytes);
  SysGenDevice device(uuid);
  const SharedView view = device.map_shared_view();
  auto rng = SnapsafeRng::instantiate(registry, entropy, {},
                                      WipePolicy{.wipe_on_fork = true,
                                                 .wipe_on_suspend = true},
                                      DetectionMode::kSelfCheck, &view);
  if (!rng.ok()) return rng.error();
  SnapsafeRng& guarded = rng.value();

  RawPageDrbg raw(entropy);

  ArmSamples samples;
  samples.guarded.reserve(batches);
  samples.unguarded.reserve(batches);

  const auto run_batches = [&](auto&& guarded_op, auto&& unguarded_op) {
    // Warmup, excluded from the statistics.
    for (std::uint64_t i = 0; i < ops_per_batch; ++i) {
      if (with_guard) guarded_op();
      unguarded_op();
    }
    for (std::size_t b = 0; b < batches; ++b) {
      if (with_guard) {
        const auto t0 = Clock::now();
        for (std::uint64_t i = 0; i < ops_per_batch; ++i) guarded_op();
        const auto t1 = Clock::now();
        samples.guarded.push_back(ns_per_op(t0, t1, ops_per_batch));
      }
      const auto t0 = Clock::now();
      for (std::uint64_t i = 0; i < ops_per_batch; ++i) unguarded_op();
      const auto t1 = Clock::now();
      samples.unguarded.push_back(ns_per_op(t0, t1, ops_per_batch));
    }
  };

  if (workload == "increment") {
    run_batches(
        [&] {
          auto nonce = guarded.next_nonce();
          do_not_optimize(nonce.value());
        },
        [&] {
          Block16 nonce;
          raw.next_nonce(nonce);
          do_not_optimize(nonce);
        });
  } else if (workload == "drbg") {
    std::array<std::uint8_t, 16> buf{};
    run_batches(
        [&] {
          (void)guarded.generate(buf);
          do_not_optimize(buf);
        },
        [&] {
          raw.generate(buf);
          do_not_optimize(buf);
        });
  } else {  // reseed
    run_batches(
        [&] {
          (void)guarded.reseed();
          do_not_optimize(guarded);
        },
        [&] {
          raw.reseed(entropy);
          do_not_optimize(raw);
        });
  }

  if (with_guard) {
    report.guarded_ns = median_of(samples.guarded);
    report.guarded_mad = mad_of(samples.guarded, report.guarded_ns);
  }
  report.unguarded_ns = median_of(samples.unguarded);
  report.unguarded_mad = mad_of(samples.unguarded, report.unguarded_ns);
  if (with_guard && report.unguarded_ns > 0.0) {
    report.ratio = report.guarded_ns / report.unguarded_ns;
  }
  return report;
}

}  // namespace snapsafe
