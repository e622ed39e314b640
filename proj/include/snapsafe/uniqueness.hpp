#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>

#include "snapsafe/bytes.hpp"
#include "snapsafe/result.hpp"
#include "snapsafe/vm_sim.hpp"

namespace snapsafe {

// The earliest pair of emissions sharing one value, under the canonical
// order (tick, then guest id, then emission order).
struct Collision {
  std::uint64_t tick_first = 0;
  std::string guest_first;
  std::uint64_t tick_second = 0;
  std::string guest_second;
  Bytes value;
};

struct UniquenessReport {
  std::size_t total = 0;            // nonce emissions examined
  std::size_t duplicate_count = 0;  // emissions whose value appeared before
  std::optional<Collision> first_collision;

  bool unique() const { return duplicate_count == 0; }
  std::string verdict() const { return unique() ? "unique" : "duplicates"; }
  std::string render() const;
};

// Exact multiset scan over the nonce emissions (byte draws are ignored:
// variable-length output is not an identifier). Deterministic: the first
// collision is the earliest repeated emission by (tick, guest id).
UniquenessReport check_uniqueness(std::span<const Emission> emissions);

// Quadratic pairwise reference used to cross-check the hashed scan.
UniquenessReport check_uniqueness_naive(std::span<const Emission> emissions);

// Reconstructs nonce emissions from rendered event-log text. Lines whose
// detail is `nonce:<hex>` or `emit:<slot>:<hex>` carry emissions; all other
// lines are structural. Malformed lines fail with ParseError.
Result<std::vector<Emission>> parse_emissions_from_log(std::string_view log_text);

}  // namespace snapsafe
