#include <algorithm>
#include <cstring>

#include "doctest.h"
#include "snapsafe/snapsafe_rng.hpp"

using namespace snapsafe;

namespace {

constexpr std::size_t kPage = RegionRegistry::kPageSize;

VmGenUuid uuid_of(std::uint64_t n) {
  VmGenUuid u;
  store_le64(u.bytes.data(), n);
  u.bytes[15] = 0xaa;
  return u;
}

Bytes pers(const char* text) {
  return Bytes(text, text + std::strlen(text));
}

U128 as_u128(const Block16& b) { return U128::from_bytes(b); }

}  // namespace

TEST_CASE("instantiate seeds the page and marks it live") {
  RegionRegistry reg;
  DeterministicEntropy entropy(1, "rng");
  auto rng = SnapsafeRng::instantiate(reg, entropy, pers("p"));
  REQUIRE(rng.ok());
  SnapsafeRng& r = rng.value();

  CHECK(r.guard_live());
  CHECK(r.reseed_counter() == 1);
  CHECK(r.stats().reseeds == 1);
  CHECK(r.mode() == DetectionMode::kSelfCheck);

  // Default policy wipes on both fork and suspend, no snapshot exclusion.
  const auto policy = reg.policy(r.guard_region());
  REQUIRE(policy.has_value());
  CHECK(policy->wipe_on_fork);
  CHECK(policy->wipe_on_suspend);
  CHECK_FALSE(policy->exclude_from_snapshot);

  const auto page = reg.read_bytes(r.guard_region());
  REQUIRE(page.ok());
  REQUIRE(page.value().size() == kPage);
  CHECK(std::equal(SnapsafeRng::kLiveMarker.begin(), SnapsafeRng::kLiveMarker.end(),
                   page.value().begin() + SnapsafeRng::kMarkerOff));
}

TEST_CASE("the page bytes are the whole working state") {
  RegionRegistry reg;
  DeterministicEntropy entropy(2, "rng");
  auto rng = SnapsafeRng::instantiate(reg, entropy, pers("layout"));
  REQUIRE(rng.ok());

  // Reconstruct a DRBG from the raw page at the documented offsets; its
  // output must match the RNG's, proving nothing lives outside the page.
  const auto page = reg.read_bytes(rng.value().guard_region());
  REQUIRE(page.ok());
  CtrDrbg::State state;
  std::memcpy(state.key.data(), page.value().data() + SnapsafeRng::kKeyOff, 16);
  std::memcpy(state.v.data(), page.value().data() + SnapsafeRng::kVOff, 16);
  state.reseed_counter =
      load_le64(page.value().data() + SnapsafeRng::kReseedCounterOff);
  CtrDrbg shadow = CtrDrbg::from_state(state);

  Bytes want(64);
  REQUIRE(shadow.generate(want).ok());
  Bytes got(64);
  REQUIRE(rng.value().generate(got).ok());
  CHECK(got == want);
}

TEST_CASE("same entropy and personalization reproduce the stream") {
  RegionRegistry reg_a;
  RegionRegistry reg_b;
  DeterministicEntropy ent_a(3, "twin");
  DeterministicEntropy ent_b(3, "twin");
  auto a = SnapsafeRng::instantiate(reg_a, ent_a, pers("x"));
  auto b = SnapsafeRng::instantiate(reg_b, ent_b, pers("x"));
  REQUIRE(a.ok());
  REQUIRE(b.ok());

  Bytes out_a(48);
  Bytes out_b(48);
  REQUIRE(a.value().generate(out_a).ok());
  REQUIRE(b.value().generate(out_b).ok());
  CHECK(out_a == out_b);

  // Different personalization diverges immediately.
  RegionRegistry reg_c;
  DeterministicEntropy ent_c(3, "twin");
  auto c = SnapsafeRng::instantiate(reg_c, ent_c, pers("y"));
  REQUIRE(c.ok());
  Bytes out_c(48);
  REQUIRE(c.value().generate(out_c).ok());
  CHECK(out_c != out_a);
}

TEST_CASE("fork is detected in the child and the twins diverge") {
  RegionRegistry parent_reg;
  DeterministicEntropy parent_entropy(4, "parent");
  auto parent = SnapsafeRng::instantiate(parent_reg, parent_entropy, pers("f"));
  REQUIRE(parent.ok());
  Block16 warmup;
  REQUIRE(parent.value().generate(warmup).ok());

  RegionRegistry child_reg = parent_reg.on_fork();
  DeterministicEntropy child_entropy(5, "child");
  auto child = SnapsafeRng::adopt(child_reg, parent.value().guard_region(),
                                  child_entropy);
  REQUIRE(child.ok());

  // The kernel wipe left the child's guard dead; adoption itself does not
  // reseed (no page writes), detection happens on first use.
  CHECK_FALSE(child.value().guard_live());
  CHECK(parent.value().guard_live());
  CHECK(child.value().stats().reseeds == 0);

  Bytes child_out(32);
  REQUIRE(child.value().generate(child_out).ok());
  CHECK(child.value().stats().reseeds == 1);
  CHECK(child.value().guard_live());

  Bytes parent_out(32);
  REQUIRE(parent.value().generate(parent_out).ok());
  CHECK(parent_out != child_out);
  // Parent never saw a stale guard.
  CHECK(parent.value().stats().reseeds == 1);
}

TEST_CASE("suspend wipe forces a reseed before the next output") {
  RegionRegistry reg;
  DeterministicEntropy entropy(6, "suspend");
  auto rng = SnapsafeRng::instantiate(reg, entropy, pers("s"));
  REQUIRE(rng.ok());
  Bytes before(32);
  REQUIRE(rng.value().generate(before).ok());

  const auto wiped = reg.on_suspend();
  CHECK(std::count(wiped.begin(), wiped.end(), rng.value().guard_region()) == 1);
  CHECK_FALSE(rng.value().guard_live());

  Bytes after(32);
  REQUIRE(rng.value().generate(after).ok());
  CHECK(rng.value().guard_live());
  CHECK(rng.value().stats().reseeds == 2);
  CHECK(after != before);
  // Reseed rebuilt the counter discipline from scratch.
  CHECK(rng.value().reseed_counter() == 2);  // 1 after reseed, +1 for the output
}

TEST_CASE("wipe then output equals a fresh instantiation on the same entropy") {
  // The wiped state carries zero bytes of the old identity, so recovery must
  // be indistinguishable from starting over with no personalization.
  const Bytes seed_a(32, 0x11);
  const Bytes seed_b(32, 0x22);

  QueuedEntropy wiped_src;
  wiped_src.push(seed_a);
  wiped_src.push(seed_b);
  RegionRegistry reg;
  auto rng = SnapsafeRng::instantiate(reg, wiped_src, {});
  REQUIRE(rng.ok());
  reg.on_suspend();
  Bytes recovered(32);
  REQUIRE(rng.value().generate(recovered).ok());

  QueuedEntropy fresh_src(seed_b);
  auto fresh = CtrDrbg::instantiate(fresh_src, {});
  REQUIRE(fresh.ok());
  Bytes want(32);
  REQUIRE(fresh.value().generate(want).ok());
  CHECK(recovered == want);
}

TEST_CASE("generation bump is caught via the attached view") {
  SysGenDevice dev(uuid_of(1));
  const SharedView view = dev.map_shared_view();
  RegionRegistry reg;
  DeterministicEntropy entropy(7, "epoch");
  auto rng = SnapsafeRng::instantiate(reg, entropy, pers("e"),
                                      {.wipe_on_fork = true, .wipe_on_suspend = true},
                                      DetectionMode::kSelfCheck, &view);
  REQUIRE(rng.ok());
  CHECK(rng.value().epoch() == 0);

  Bytes out(32);
  REQUIRE(rng.value().generate(out).ok());
  CHECK(rng.value().stats().reseeds == 1);  // no false positive

  REQUIRE(dev.backend_bump(uuid_of(2)).ok());
  REQUIRE(rng.value().generate(out).ok());
  CHECK(rng.value().stats().reseeds == 2);
  CHECK(rng.value().epoch() == 1);
  CHECK(rng.value().guard_live());

  // Stable again until the next bump.
  REQUIRE(rng.value().generate(out).ok());
  CHECK(rng.value().stats().reseeds == 2);
}

TEST_CASE("attaching a view retroactively flags a stale epoch") {
  SysGenDevice dev(uuid_of(1));
  REQUIRE(dev.backend_bump(uuid_of(2)).ok());
  REQUIRE(dev.backend_bump(uuid_of(3)).ok());

  RegionRegistry reg;
  DeterministicEntropy entropy(8, "attach");
  auto rng = SnapsafeRng::instantiate(reg, entropy, pers("a"));
  REQUIRE(rng.ok());
  CHECK(rng.value().epoch() == 0);

  // Page says epoch 0, device says 2: the next output must reseed.
  rng.value().attach_generation_view(dev.map_shared_view());
  Bytes out(16);
  REQUIRE(rng.value().generate(out).ok());
  CHECK(rng.value().stats().reseeds == 2);
  CHECK(rng.value().epoch() == 2);
}

TEST_CASE("notify-only mode leaves epoch checks to the watcher") {
  SysGenDevice dev(uuid_of(1));
  const SharedView view = dev.map_shared_view();
  RegionRegistry reg;
  DeterministicEntropy entropy(9, "notify");
  // wipe_on_suspend so the dead-guard leg below is reachable; epoch checks
  // stay off regardless because of the detection mode.
  auto rng = SnapsafeRng::instantiate(reg, entropy, pers("n"),
                                      {.wipe_on_suspend = true},
                                      DetectionMode::kNotifyOnly, &view);
  REQUIRE(rng.ok());

  REQUIRE(dev.backend_bump(uuid_of(2)).ok());
  Bytes out(16);
  REQUIRE(rng.value().generate(out).ok());
  // No self-check reseed despite the stale epoch: that is the failure mode
  // this detection mode accepts between notification and acknowledgment.
  CHECK(rng.value().stats().reseeds == 1);
  CHECK(rng.value().epoch() == 0);

  // The watcher actor's explicit reseed closes the gap.
  REQUIRE(rng.value().reseed().ok());
  CHECK(rng.value().stats().reseeds == 2);
  CHECK(rng.value().epoch() == 1);

  // A dead guard cell is still honored in notify-only mode: a wipe is
  // unmistakable even without self-checks.
  reg.on_suspend();
  REQUIRE(rng.value().generate(out).ok());
  CHECK(rng.value().stats().reseeds == 3);
}

TEST_CASE("nonces increment exactly within an epoch") {
  RegionRegistry reg;
  DeterministicEntropy entropy(10, "nonce");
  auto rng = SnapsafeRng::instantiate(reg, entropy, pers("n"));
  REQUIRE(rng.ok());

  auto first = rng.value().next_nonce();
  REQUIRE(first.ok());
  U128 previous = as_u128(first.value());
  for (int i = 0; i < 1000; ++i) {
    auto next = rng.value().next_nonce();
    REQUIRE(next.ok());
    U128 expected = previous;
    expected.increment();
    REQUIRE(as_u128(next.value()) == expected);
    // Big-endian layout makes numeric order equal lexicographic order.
    REQUIRE(next.value() > previous.to_bytes());
    previous = expected;
  }
}

TEST_CASE("interleaved generates do not disturb the nonce counter") {
  RegionRegistry reg;
  DeterministicEntropy entropy(11, "mixed");
  auto rng = SnapsafeRng::instantiate(reg, entropy, pers("m"));
  REQUIRE(rng.ok());

  auto n1 = rng.value().next_nonce();
  REQUIRE(n1.ok());
  Bytes scratch(64);
  REQUIRE(rng.value().generate(scratch).ok());
  auto n2 = rng.value().next_nonce();
  REQUIRE(n2.ok());
  U128 expected = as_u128(n1.value());
  expected.increment();
  CHECK(as_u128(n2.value()) == expected);
}

TEST_CASE("a reseed rebases the nonce counter") {
  RegionRegistry reg;
  DeterministicEntropy entropy(12, "rebase");
  auto rng = SnapsafeRng::instantiate(reg, entropy, pers("r"));
  REQUIRE(rng.ok());

  auto before = rng.value().next_nonce();
  REQUIRE(before.ok());

  reg.on_suspend();
  auto after = rng.value().next_nonce();
  REQUIRE(after.ok());

  // The post-wipe nonce comes from fresh DRBG output, not from the old
  // counter + 1.
  U128 continued = as_u128(before.value());
  continued.increment();
  CHECK(as_u128(after.value()) != continued);
  CHECK(after.value() != before.value());
}

TEST_CASE("steady-state output needs no further entropy") {
  DeterministicEntropy inner(13, "steady");
  CountingEntropy entropy(inner);
  RegionRegistry reg;
  auto rng = SnapsafeRng::instantiate(reg, entropy, pers("s"));
  REQUIRE(rng.ok());
  CHECK(entropy.fills() == 1);

  Bytes out(32);
  for (int i = 0; i < 100; ++i) {
    REQUIRE(rng.value().generate(out).ok());
    REQUIRE(rng.value().next_nonce().ok());
  }
  CHECK(entropy.fills() == 1);
  CHECK(rng.value().stats().guard_checks == 200);  // one per output request
}

TEST_CASE("the reseed interval triggers an automatic reseed") {
  DeterministicEntropy inner(14, "interval");
  CountingEntropy entropy(inner);
  RegionRegistry reg;
  auto rng = SnapsafeRng::instantiate(reg, entropy, pers("i"));
  REQUIRE(rng.ok());
  rng.value().set_reseed_interval(2);

  Bytes out(16);
  REQUIRE(rng.value().generate(out).ok());  // counter 1 -> 2
  REQUIRE(rng.value().generate(out).ok());  // counter 2 -> 3
  CHECK(entropy.fills() == 1);
  REQUIRE(rng.value().generate(out).ok());  // counter 3 > 2: reseed, then 1 -> 2
  CHECK(entropy.fills() == 2);
  CHECK(rng.value().stats().reseeds == 2);
  CHECK(rng.value().reseed_counter() == 2);
}

TEST_CASE("oversized requests are refused") {
  RegionRegistry reg;
  DeterministicEntropy entropy(15, "big");
  auto rng = SnapsafeRng::instantiate(reg, entropy, pers("b"));
  REQUIRE(rng.ok());
  Bytes out((1u << 16) + 1);
  auto r = rng.value().generate(out);
  REQUIRE_FALSE(r.ok());
  CHECK(r.error().code == Errc::kRequestTooLarge);
}

TEST_CASE("personalization longer than the seed is refused") {
  RegionRegistry reg;
  DeterministicEntropy entropy(16, "pers");
  const Bytes long_pers(33, 0x01);
  auto rng = SnapsafeRng::instantiate(reg, entropy, long_pers);
  REQUIRE_FALSE(rng.ok());
  CHECK(rng.error().code == Errc::kPersonalizationTooLong);
}

TEST_CASE("instantiate surfaces entropy failure") {
  RegionRegistry reg;
  QueuedEntropy empty;
  auto rng = SnapsafeRng::instantiate(reg, empty, {});
  REQUIRE_FALSE(rng.ok());
  CHECK(rng.error().code == Errc::kEntropyUnavailable);
}

TEST_CASE("adopt validates the region") {
  RegionRegistry reg;
  DeterministicEntropy entropy(17, "adopt");

  auto missing = SnapsafeRng::adopt(reg, 42, entropy);
  REQUIRE_FALSE(missing.ok());
  CHECK(missing.error().code == Errc::kNoSuchRegion);

  auto oversized = reg.register_region(2 * kPage, WipePolicy{});
  REQUIRE(oversized.ok());
  auto bad = SnapsafeRng::adopt(reg, oversized.value(), entropy);
  REQUIRE_FALSE(bad.ok());
  CHECK(bad.error().code == Errc::kBadSize);
}

TEST_CASE("adopting a live page continues the stream without reseeding") {
  RegionRegistry reg;
  DeterministicEntropy entropy(18, "handoff");
  auto original = SnapsafeRng::instantiate(reg, entropy, pers("h"));
  REQUIRE(original.ok());
  Bytes first(32);
  REQUIRE(original.value().generate(first).ok());

  // Mirror instance on a second identical universe tells us what the
  // uninterrupted stream would have produced next.
  RegionRegistry mirror_reg;
  DeterministicEntropy mirror_entropy(18, "handoff");
  auto mirror = SnapsafeRng::instantiate(mirror_reg, mirror_entropy, pers("h"));
  REQUIRE(mirror.ok());
  Bytes scratch(32);
  REQUIRE(mirror.value().generate(scratch).ok());
  Bytes want(32);
  REQUIRE(mirror.value().generate(want).ok());

  DeterministicEntropy unused(19, "unused");
  auto adopted =
      SnapsafeRng::adopt(reg, original.value().guard_region(), unused);
  REQUIRE(adopted.ok());
  Bytes got(32);
  REQUIRE(adopted.value().generate(got).ok());
  CHECK(got == want);
  CHECK(adopted.value().stats().reseeds == 0);
}
