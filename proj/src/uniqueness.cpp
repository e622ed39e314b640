#include "snapsafe/uniqueness.hpp"

#include <algorithm>
#include <charconv>
#include <string_view>
#include <unordered_map>

namespace snapsafe {

namespace {

// Canonical examination order: tick, then guest id, then original position.
std::vector<std::size_t> canonical_order(std::span<const Emission> emissions) {
  std::vector<std::size_t> order;
  order.reserve(emissions.size());
  for (std::size_t i = 0; i < emissions.size(); ++i) {
    if (emissions[i].is_nonce) order.push_back(i);
  }
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (emissions[a].tick != emissions[b].tick) {
      return emissions[a].tick < emissions[b].tick;
    }
    if (emissions[a].guest != emissions[b].guest) {
      return emissions[a].guest < emissions[b].guest;
    }
    return a < b;
  });
  return order;
}

struct BytesHash {
  std::size_t operator()(const Bytes& b) const {
    // FNV-1a; value distribution comes from the DRBG, this only buckets.
    std::size_t h = 1469598103934665603ull;
    for (std::uint8_t byte : b) {
      h ^= byte;
      h *= 1099511628211ull;
    }
    return h;
  }
};

Collision make_collision(const Emission& first, const Emission& second) {
  return Collision{first.tick, first.guest, second.tick, second.guest, second.value};
}

}  // namespace

std::string UniquenessReport::render() const {
  std::string out;
  out += "emissions=" + std::to_string(total) + "\n";
  out += "duplicates=" + std::to_string(duplicate_count) + "\n";
  if (first_collision.has_value()) {
    const Collision& c = *first_collision;
    out += "first_collision value=" + hex_encode(c.value) + " first=" + c.guest_first +
           "@t" + std::to_string(c.tick_first) + " second=" + c.guest_second + "@t" +
           std::to_string(c.tick_second) + "\n";
  }
  out += "verdict=" + verdict() + "\n";
  return out;
}

UniquenessReport check_uniqueness(std::span<const Emission> emissions) {
  UniquenessReport report;
  const std::vector<std::size_t> order = canonical_order(emissions);
  report.total = order.size();

  std::unordered_map<Bytes, std::size_t, BytesHash> first_seen;
  first_seen.reserve(order.size() * 2);
  for (std::size_t idx : order) {
    const Emission& e = emissions[idx];
    auto [it, inserted] = first_seen.try_emplace(e.value, idx);
    if (!inserted) {
      ++report.duplicate_count;
      if (!report.first_collision.has_value()) {
        report.first_collision = make_collision(emissions[it->second], e);
      }
    }
  }
  return report;
}

UniquenessReport check_uniqueness_naive(std::span<const Emission> emissions) {
  UniquenessReport report;
  const std::vector<std::size_t> order = canonical_order(emissions);
  report.total = order.size();

  for (std::size_t i = 0; i < order.size(); ++i) {
    const Emission& e = emissions[order[i]];
    for (std::size_t j = 0; j < i; ++j) {
      const Emission& earlier = emissions[order[j]];
      if (earlier.value == e.value) {
        ++report.duplicate_count;
        if (!report.first_collision.has_value()) {
          report.first_collision = make_collision(earlier, e);
        }
        break;  // count each repeat once, against its earliest predecessor
      }
    }
  }
  return report;
}

Result<std::vector<Emission>> parse_emissions_from_log(std::string_view log_text) {
  std::vector<Emission> out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < log_text.size()) {
    const std::size_t eol = std::min(log_text.find('\n', pos), log_text.size());
    const std::string_view line = log_text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (line.empty()) continue;

    const auto fail = [&](const std::string& what) {
      return make_error(Errc::kParseError,
                        "log line " + std::to_string(line_no) + ": " + what);
    };

    // Expect: t=<tick> guest=<id> event=<kind> gen=<n> detail=<...>
    std::array<std::string_view, 5> fields;
    std::size_t field_start = 0;
    for (std::size_t f = 0; f < 4; ++f) {
      const std::size_t space = line.find(' ', field_start);
      if (space == std::string_view::npos) return fail("expected five fields");
      fields[f] = line.substr(field_start, space - field_start);
      field_start = space + 1;
    }
    fields[4] = line.substr(field_start);

    constexpr std::string_view kPrefixes[5] = {"t=", "guest=", "event=", "gen=",
                                               "detail="};
    for (std::size_t f = 0; f < 5; ++f) {
      if (!fields[f].starts_with(kPrefixes[f])) {
        return fail("field " + std::to_string(f + 1) + " must start with '" +
                    std::string(kPrefixes[f]) + "'");
      }
      fields[f].remove_prefix(kPrefixes[f].size());
    }

    std::uint64_t tick = 0;
    {
      const char* end = fields[0].data() + fields[0].size();
      auto [p, ec] = std::from_chars(fields[0].data(), end, tick);
      if (ec != std::errc() || p != end) return fail("bad tick");
    }

    const std::string_view detail = fields[4];
    std::string_view hex;
    if (detail.starts_with("nonce:")) {
      hex = detail.substr(6);
    } else if (detail.starts_with("emit:")) {
      const std::size_t second_colon = detail.find(':', 5);
      if (second_colon == std::string_view::npos) return fail("emit detail needs value");
      hex = detail.substr(second_colon + 1);
    } else {
      continue;  // structural line
    }
    auto value = hex_decode(hex);
    if (!value.ok()) return fail("bad hex in emission value");
    out.push_back(Emission{tick, std::string(fields[1]), std::move(value.value()), true});
  }
  return out;
}

}  // namespace snapsafe
