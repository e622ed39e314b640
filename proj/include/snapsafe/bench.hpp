#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "snapsafe/result.hpp"

namespace snapsafe {

// Micro-benchmark result. Medians and median absolute deviations are over
// interleaved batches (guarded batch, unguarded batch, repeat), which keeps
// slow drift from biasing one arm.
struct BenchReport {
  std::string workload;
  std::uint64_t iterations = 0;  // total ops per arm
  std::size_t batches = 0;
  bool with_guard = true;        // false: only the raw arm was measured

  double guarded_ns = 0.0;       // median ns/op
  double guarded_mad = 0.0;
  double unguarded_ns = 0.0;
  double unguarded_mad = 0.0;
  double ratio = 0.0;            // guarded / unguarded

  std::string notes;

  std::string render() const;
};

// Workloads:
//   increment  next 128-bit nonce with the guard check vs a bare counter
//              increment (>= 10^6 iterations enforced)
//   drbg       16-byte generate through the guarded front end vs the bare
//              DRBG underneath
//   reseed     full entropy-pull + reseed path vs the bare DRBG reseed,
//              against the chosen entropy source ("sys" or "test")
// Numbers are hardware-dependent and non-deterministic; callers must not
// golden-file them.
Result<BenchReport> run_bench(std::string_view workload, bool with_guard,
                              std::uint64_t iters, std::string_view entropy_kind,
                              std::uint64_t seed);

}  // namespace snapsafe
