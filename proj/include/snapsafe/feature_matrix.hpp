#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace snapsafe {

// Mechanism-by-feature comparison of the three uniqueness mechanisms the
// library models: the wipe-on-fork/suspend guard page, a 128-bit backend
// identity value (UUID), and the incremental generation device. Cells for
// behaviors the library implements are filled in by running the probe
// against the real code; cells describing deployment environments
// (privileges, containers) are static and marked as such.
struct FeatureMatrix {
  struct Row {
    std::string feature;
    std::array<std::string, 3> cells;  // guard page, uuid, incremental id
    bool probed = false;               // true: cells came from live probes
  };

  std::vector<Row> rows;

  std::string render() const;
};

FeatureMatrix build_feature_matrix(std::uint64_t seed);

}  // namespace snapsafe
