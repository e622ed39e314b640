#include <random>
#include <string>
#include <vector>

#include "doctest.h"
#include "snapsafe/ctr_drbg.hpp"
#include "snapsafe/entropy.hpp"
#include "snapsafe/uniqueness.hpp"

using namespace snapsafe;

namespace {

Bytes value_of(std::uint32_t n) {
  Bytes b(4);
  store_le32(b.data(), n);
  return b;
}

Emission nonce(std::uint64_t tick, std::string guest, std::uint32_t value) {
  return Emission{tick, std::move(guest), value_of(value), true};
}

}  // namespace

TEST_CASE("disjoint value sets are unique") {
  std::vector<Emission> emissions = {
      nonce(0, "a", 1), nonce(1, "a", 2), nonce(2, "a", 3),
      nonce(0, "b", 4), nonce(1, "b", 5), nonce(2, "b", 6),
  };
  const UniquenessReport report = check_uniqueness(emissions);
  CHECK(report.total == 6);
  CHECK(report.duplicate_count == 0);
  CHECK(report.unique());
  CHECK(report.verdict() == "unique");
  CHECK_FALSE(report.first_collision.has_value());
}

TEST_CASE("one shared value is one duplicate") {
  std::vector<Emission> emissions = {
      nonce(0, "a", 1), nonce(1, "a", 2),
      nonce(0, "b", 2), nonce(1, "b", 3),
  };
  const UniquenessReport report = check_uniqueness(emissions);
  CHECK(report.total == 4);
  CHECK(report.duplicate_count == 1);
  CHECK_FALSE(report.unique());
  REQUIRE(report.first_collision.has_value());
  CHECK(report.first_collision->value == value_of(2));
  // Canonical order at tick 0: guest a then b; the value 2 appears first in
  // guest b at tick 0, repeated by guest a at tick 1.
  CHECK(report.first_collision->guest_first == "b");
  CHECK(report.first_collision->tick_first == 0);
  CHECK(report.first_collision->guest_second == "a");
  CHECK(report.first_collision->tick_second == 1);
}

TEST_CASE("collisions are attributed in canonical order, not input order") {
  // Input order deliberately scrambled: the scan must sort by (tick, guest)
  // before deciding who emitted a value first.
  std::vector<Emission> emissions = {
      nonce(9, "z", 7),
      nonce(3, "m", 7),
      nonce(5, "a", 7),
  };
  const UniquenessReport report = check_uniqueness(emissions);
  CHECK(report.duplicate_count == 2);
  REQUIRE(report.first_collision.has_value());
  CHECK(report.first_collision->tick_first == 3);
  CHECK(report.first_collision->guest_first == "m");
  CHECK(report.first_collision->tick_second == 5);
  CHECK(report.first_collision->guest_second == "a");
}

TEST_CASE("same tick ties break by guest id") {
  std::vector<Emission> emissions = {
      nonce(4, "beta", 1),
      nonce(4, "alpha", 1),
  };
  const UniquenessReport report = check_uniqueness(emissions);
  REQUIRE(report.first_collision.has_value());
  CHECK(report.first_collision->guest_first == "alpha");
  CHECK(report.first_collision->guest_second == "beta");
}

TEST_CASE("byte draws are not identifiers and are skipped") {
  std::vector<Emission> emissions = {
      Emission{0, "a", value_of(1), false},
      Emission{1, "b", value_of(1), false},
      nonce(2, "c", 9),
  };
  const UniquenessReport report = check_uniqueness(emissions);
  CHECK(report.total == 1);
  CHECK(report.duplicate_count == 0);
}

TEST_CASE("a value emitted n times counts n-1 duplicates") {
  std::vector<Emission> emissions = {
      nonce(0, "a", 5), nonce(1, "a", 5), nonce(2, "a", 5), nonce(3, "a", 5),
  };
  CHECK(check_uniqueness(emissions).duplicate_count == 3);
  CHECK(check_uniqueness_naive(emissions).duplicate_count == 3);
}

TEST_CASE("empty input renders a clean unique report") {
  const UniquenessReport report = check_uniqueness({});
  CHECK(report.render() == "emissions=0\nduplicates=0\nverdict=unique\n");
}

TEST_CASE("report rendering includes the first collision") {
  std::vector<Emission> emissions = {nonce(1, "a", 2), nonce(3, "b", 2)};
  const UniquenessReport report = check_uniqueness(emissions);
  CHECK(report.render() ==
        "emissions=2\n"
        "duplicates=1\n"
        "first_collision value=02000000 first=a@t1 second=b@t3\n"
        "verdict=duplicates\n");
}

TEST_CASE("hashed scan agrees with the quadratic reference") {
  std::mt19937_64 rng(777);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t count = rng() % 60;
    std::vector<Emission> emissions;
    emissions.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
      // Small value pool and few guests force frequent collisions.
      emissions.push_back(Emission{rng() % 8,
                                   std::string(1, static_cast<char>('a' + rng() % 3)),
                                   value_of(static_cast<std::uint32_t>(rng() % 12)),
                                   rng() % 5 != 0});
    }
    const UniquenessReport fast = check_uniqueness(emissions);
    const UniquenessReport naive = check_uniqueness_naive(emissions);
    REQUIRE(fast.total == naive.total);
    REQUIRE(fast.duplicate_count == naive.duplicate_count);
    REQUIRE(fast.first_collision.has_value() == naive.first_collision.has_value());
    if (fast.first_collision.has_value()) {
      REQUIRE(fast.first_collision->value == naive.first_collision->value);
      REQUIRE(fast.first_collision->tick_first == naive.first_collision->tick_first);
      REQUIRE(fast.first_collision->guest_first == naive.first_collision->guest_first);
      REQUIRE(fast.first_collision->tick_second == naive.first_collision->tick_second);
      REQUIRE(fast.first_collision->guest_second == naive.first_collision->guest_second);
    }
  }
}

TEST_CASE("a healthy DRBG produces no 128-bit collisions at scale") {
  DeterministicEntropy entropy(31337, "collision-scan");
  auto drbg = CtrDrbg::instantiate(entropy, {});
  REQUIRE(drbg.ok());
  std::vector<Emission> emissions;
  constexpr std::size_t kCount = 50000;
  emissions.reserve(kCount);
  for (std::size_t i = 0; i < kCount; ++i) {
    Bytes value(16);
    REQUIRE(drbg.value().generate(value).ok());
    emissions.push_back(Emission{i, "g", std::move(value), true});
  }
  const UniquenessReport report = check_uniqueness(emissions);
  CHECK(report.total == kCount);
  CHECK(report.duplicate_count == 0);
}

TEST_CASE("emissions are reconstructed from rendered logs") {
  const std::string log =
      "t=0 guest=root event=Boot gen=0 detail=ok\n"
      "t=5 guest=root event=Invoke gen=0 detail=deliver\n"
      "t=5 guest=root event=Invoke gen=0 detail=nonce:000102030405060708090a0b0c0d0e0f\n"
      "t=6 guest=root event=Invoke gen=0 detail=cache:a:ffeeddccbbaa99887766554433221100\n"
      "t=7 guest=root event=Invoke gen=0 detail=bytes:aabb\n"
      "t=30 guest=root.1 event=Invoke gen=1 detail=emit:a:ffeeddccbbaa99887766554433221100\n"
      "t=31 guest=root.1 event=Fence gen=1 detail=waited:0\n";
  auto parsed = parse_emissions_from_log(log);
  REQUIRE(parsed.ok());
  // Only the nonce draw and the cached-value emit count; cache lines record
  // generation, not use, and byte draws are not identifiers.
  REQUIRE(parsed.value().size() == 2);
  CHECK(parsed.value()[0].tick == 5);
  CHECK(parsed.value()[0].guest == "root");
  CHECK(parsed.value()[0].value == hex_decode("000102030405060708090a0b0c0d0e0f").value());
  CHECK(parsed.value()[1].tick == 30);
  CHECK(parsed.value()[1].guest == "root.1");
  CHECK(parsed.value()[1].value == hex_decode("ffeeddccbbaa99887766554433221100").value());
}

TEST_CASE("malformed log lines are parse errors with a line number") {
  auto expect_error = [](const std::string& log, const char* fragment) {
    auto r = parse_emissions_from_log(log);
    REQUIRE_FALSE(r.ok());
    CHECK(r.error().code == Errc::kParseError);
    CHECK(r.error().message.find(fragment) != std::string::npos);
  };
  expect_error("t=0 guest=g event=Boot gen=0\n", "five fields");
  expect_error("tick=0 guest=g event=Boot gen=0 detail=ok\n", "t=");
  expect_error("t=0 guest=g kind=Boot gen=0 detail=ok\n", "event=");
  expect_error("t=zero guest=g event=Boot gen=0 detail=ok\n", "bad tick");
  expect_error("t=0 guest=g event=Invoke gen=0 detail=nonce:xyz\n", "bad hex");
  expect_error("t=0 guest=g event=Invoke gen=0 detail=emit:a\n", "emit detail");
  expect_error(
      "t=0 guest=g event=Boot gen=0 detail=ok\nbroken line\n",
      "log line 2");
}

TEST_CASE("empty log text yields no emissions") {
  auto parsed = parse_emissions_from_log("");
  REQUIRE(parsed.ok());
  CHECK(parsed.value().empty());
}
