#include <catch_amalgamated.hpp>

#include "coma/netlist.hpp"
#include "coma/rand.hpp"
#include "coma/switchnet.hpp"

using namespace coma;

namespace {

// Independent oracle: trace every output position backwards through the
// stages to its driving input and accumulated inversion. Pull-style, one
// path per output, unlike the push-style evaluation in csn_forward.
BitVec trace_oracle(const NetworkTopology& t, const Trn& trn, const BitVec& x) {
  std::uint32_t n = t.width();
  BitVec y(n);
  for (std::uint32_t p = 0; p < n; ++p) {
    bool inv = false;
    std::uint32_t pos = t.output_map()[p];
    for (std::size_t s = t.stage_count(); s-- > 0;) {
      std::uint32_t m = pos / 2;
      RrbConfig c = trn.rrb(s, m, n);
      bool upper = (pos % 2) == 0;
      inv ^= upper ? c.invert_out0 : c.invert_out1;
      std::uint32_t rrb_in = c.swap ? (upper ? 1u : 0u) : (upper ? 0u : 1u);
      pos = t.stages()[s].wiring[2 * m + rrb_in];
    }
    y.set(p, x.get(pos) ^ inv);
  }
  return y;
}

Trn random_trn(const NetworkTopology& t, Rng& rng) {
  return Trn(t, rng.next_bits(t.config_bits()));
}

}  // namespace

TEST_CASE("omega structure counts") {
  auto t8 = build_omega(8);
  CHECK(t8.stage_count() == 3);
  CHECK(t8.rrb_count() == 12);
  auto t4 = build_omega(4);
  CHECK(t4.stage_count() == 2);
  CHECK(t4.rrb_count() == 4);
  CHECK_THROWS_AS(build_omega(3), std::invalid_argument);
  CHECK_THROWS_AS(build_omega(6), std::invalid_argument);
  CHECK_THROWS_AS(build_omega(2), std::invalid_argument);
}

TEST_CASE("near-non-blocking structure counts") {
  auto t8 = build_near_nonblocking(8);
  CHECK(t8.stage_count() == 4);
  CHECK(t8.rrb_count() == 16);
  CHECK(t8.config_bits() == 48);
  auto t64 = build_near_nonblocking(64);
  CHECK(t64.stage_count() == 10);
  CHECK(t64.rrb_count() == 320);
  CHECK(t64.config_bits() == 960);
  // n=4 has zero extra stages: same wiring as the Omega network
  auto t4 = build_near_nonblocking(4);
  auto o4 = build_omega(4);
  REQUIRE(t4.stage_count() == o4.stage_count());
  for (std::size_t s = 0; s < t4.stage_count(); ++s)
    CHECK(t4.stages()[s].wiring == o4.stages()[s].wiring);
}

TEST_CASE("all-zero trn is the identity network") {
  for (auto kind : {NetworkKind::omega, NetworkKind::log_extra_stage}) {
    for (std::uint32_t n : {4u, 8u, 16u}) {
      auto t = build_network(n, kind);
      Trn zero(t, BitVec(t.config_bits()));
      Rng rng(1);
      for (int i = 0; i < 50; ++i) {
        BitVec x = rng.next_bits(n);
        CHECK(csn_forward(t, zero, x) == x);
        CHECK(rcsn_backward(t, zero, x) == x);
      }
    }
  }
}

TEST_CASE("final-stage inversion bits complement their outputs") {
  auto t = build_omega(8);
  Trn trn(t, BitVec(t.config_bits()));
  // set invert_out0 of block 1 and invert_out1 of block 3 in the last stage
  std::size_t last = t.stage_count() - 1;
  trn.bits.set(3 * (last * 4 + 1) + 1, true);
  trn.bits.set(3 * (last * 4 + 3) + 2, true);
  BitVec y = csn_forward(t, trn, BitVec(8));
  for (std::uint32_t i = 0; i < 8; ++i) CHECK(y.get(i) == (i == 2 || i == 7));
}

TEST_CASE("forward matches the backward-trace oracle") {
  Rng rng(2024);
  for (auto kind : {NetworkKind::omega, NetworkKind::log_extra_stage}) {
    for (std::uint32_t n : {4u, 8u, 16u, 64u}) {
      auto t = build_network(n, kind);
      for (int i = 0; i < 200; ++i) {
        Trn trn = random_trn(t, rng);
        BitVec x = rng.next_bits(n);
        CHECK(csn_forward(t, trn, x) == trace_oracle(t, trn, x));
      }
    }
  }
}

TEST_CASE("rcsn inverts csn") {
  Rng rng(99);
  for (auto kind : {NetworkKind::omega, NetworkKind::log_extra_stage}) {
    for (std::uint32_t n : {4u, 8u, 16u, 64u}) {
      auto t = build_network(n, kind);
      for (int i = 0; i < 500; ++i) {
        Trn trn = random_trn(t, rng);
        BitVec x = rng.next_bits(n);
        REQUIRE(rcsn_backward(t, trn, csn_forward(t, trn, x)) == x);
      }
    }
  }
}

TEST_CASE("trn length mismatch is rejected") {
  auto t = build_omega(8);
  Trn bad;
  bad.bits = BitVec(t.config_bits() - 1);
  CHECK_THROWS_AS(csn_forward(t, bad, BitVec(8)), std::invalid_argument);
  CHECK_THROWS_AS(rcsn_backward(t, bad, BitVec(8)), std::invalid_argument);
  CHECK_THROWS_AS(Trn(t, BitVec(5)), std::invalid_argument);
}

TEST_CASE("csn is affine: f(x^x') = f(x)^f(x')^f(0)") {
  Rng rng(5);
  for (auto kind : {NetworkKind::omega, NetworkKind::log_extra_stage}) {
    for (std::uint32_t n : {4u, 8u, 16u, 64u}) {
      auto t = build_network(n, kind);
      for (int i = 0; i < 100; ++i) {
        Trn trn = random_trn(t, rng);
        BitVec f0 = csn_forward(t, trn, BitVec(n));
        BitVec x = rng.next_bits(n);
        BitVec xp = rng.next_bits(n);
        BitVec lhs = csn_forward(t, trn, x ^ xp);
        BitVec rhs = csn_forward(t, trn, x) ^ csn_forward(t, trn, xp) ^ f0;
        REQUIRE(lhs == rhs);
      }
    }
  }
}

TEST_CASE("with zero inversion bits the csn permutes unit vectors") {
  Rng rng(6);
  auto t = build_near_nonblocking(16);
  for (int i = 0; i < 50; ++i) {
    Trn trn = random_trn(t, rng);
    for (std::size_t b = 0; b < t.config_bits(); b += 3) {
      trn.bits.set(b + 1, false);
      trn.bits.set(b + 2, false);
    }
    for (std::uint32_t j = 0; j < 16; ++j) {
      BitVec e(16);
      e.set(j, true);
      CHECK(csn_forward(t, trn, e).popcount() == 1);
    }
  }
}

TEST_CASE("shift_trn is a circular rotation") {
  Rng rng(8);
  auto t = build_near_nonblocking(8);
  Trn trn = random_trn(t, rng);
  CHECK(shift_trn(trn, 0).bits == trn.bits);
  CHECK(shift_trn(trn, trn.bits.size()).bits == trn.bits);
  Trn acc = trn;
  for (std::size_t i = 0; i < trn.bits.size(); ++i) acc = shift_trn(acc, 1);
  CHECK(acc.bits == trn.bits);
}

TEST_CASE("permutation counts: blocking vs near-non-blocking") {
  CHECK(enumerate_permutations(build_omega(4)) == 16);  // < 4! = 24
  std::uint64_t omega8 = enumerate_permutations(build_omega(8));
  CHECK(omega8 == 4096);
  CHECK(omega8 < 40320);
  std::uint64_t log811 = enumerate_permutations(build_near_nonblocking(8));
  CHECK(log811 == 18688);
  CHECK(log811 > omega8);
  CHECK_THROWS_AS(enumerate_permutations(build_omega(16)), std::invalid_argument);
}

TEST_CASE("netlist key counts") {
  CHECK(to_netlist(build_omega(4)).keys.size() == 12);
  CHECK(to_netlist(build_near_nonblocking(8)).keys.size() == 48);
}

TEST_CASE("netlist evaluation equals csn_forward") {
  Rng rng(77);
  for (auto kind : {NetworkKind::omega, NetworkKind::log_extra_stage}) {
    for (std::uint32_t n : {4u, 8u, 16u}) {
      auto t = build_network(n, kind);
      auto nl = to_netlist(t);
      for (int i = 0; i < 300; ++i) {
        Trn trn = random_trn(t, rng);
        BitVec x = rng.next_bits(n);
        REQUIRE(nl.eval(x, trn.bits) == csn_forward(t, trn, x));
      }
    }
  }
}

TEST_CASE("netlist text round-trips through the parser") {
  Rng rng(78);
  auto t = build_near_nonblocking(8);
  auto nl = to_netlist(t);
  auto nl2 = Netlist::parse_text(nl.to_text());
  CHECK(nl2.width == 8);
  CHECK(nl2.kind == NetworkKind::log_extra_stage);
  CHECK(nl2.keys.size() == nl.keys.size());
  for (int i = 0; i < 100; ++i) {
    Trn trn = random_trn(t, rng);
    BitVec x = rng.next_bits(8);
    REQUIRE(nl2.eval(x, trn.bits) == nl.eval(x, trn.bits));
  }
}
