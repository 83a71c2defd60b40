#include <catch_amalgamated.hpp>

#include "coma/bitvec.hpp"
#include "coma/gf2.hpp"
#include "coma/rand.hpp"

using namespace coma;

TEST_CASE("BitVec set/get and hex round-trip") {
  BitVec v(12);
  v.set(0, true);
  v.set(9, true);
  CHECK(v.get(0));
  CHECK_FALSE(v.get(1));
  CHECK(v.get(9));
  CHECK(v.popcount() == 2);
  CHECK(BitVec::from_hex(v.to_hex(), 12) == v);
  CHECK(v.to_hex() == "0102");  // bit 0 -> byte0 lsb, bit 9 -> byte1 bit1
}

TEST_CASE("BitVec from_u64 and to_u64 agree") {
  auto v = BitVec::from_u64(0xdeadbeefULL, 32);
  CHECK(v.to_u64() == 0xdeadbeefULL);
  CHECK(v.size() == 32);
  CHECK_THROWS(BitVec::from_u64(1, 65));
}

TEST_CASE("BitVec rotation composes additively") {
  Rng rng(7);
  BitVec v = rng.next_bits(37);
  CHECK(v.rotl(0) == v);
  CHECK(v.rotl(37) == v);
  BitVec w = v;
  for (int i = 0; i < 37; ++i) w = w.rotl(1);
  CHECK(w == v);
  CHECK(v.rotl(5).rotl(9) == v.rotl(14));
}

TEST_CASE("BitVec xor size mismatch throws") {
  BitVec a(8), b(9);
  CHECK_THROWS(a ^= b);
}

TEST_CASE("gf2 solve recovers a planted solution") {
  Rng rng(11);
  const std::size_t n = 20;
  BitVec x = rng.next_bits(n);
  std::vector<BitVec> rows;
  for (std::size_t r = 0; r < n + 5; ++r) {
    BitVec coeff = rng.next_bits(n);
    bool rhs = false;
    for (std::size_t c = 0; c < n; ++c) rhs ^= coeff.get(c) && x.get(c);
    BitVec row(n + 1);
    for (std::size_t c = 0; c < n; ++c) row.set(c, coeff.get(c));
    row.set(n, rhs);
    rows.push_back(row);
  }
  auto res = gf2::solve(rows, n);
  REQUIRE(res.status == gf2::SolveStatus::unique);
  CHECK(res.solution == x);
}

TEST_CASE("gf2 solve flags rank deficiency and inconsistency") {
  // single equation, two unknowns
  std::vector<BitVec> rows;
  BitVec r(3);
  r.set(0, true);
  r.set(2, true);
  rows.push_back(r);
  CHECK(gf2::solve(rows, 2).status == gf2::SolveStatus::underdetermined);

  // x0 = 0 and x0 = 1
  std::vector<BitVec> bad;
  BitVec r1(2), r2(2);
  r1.set(0, true);
  r2.set(0, true);
  r2.set(1, true);
  bad.push_back(r1);
  bad.push_back(r2);
  CHECK(gf2::solve(bad, 1).status == gf2::SolveStatus::inconsistent);
}

TEST_CASE("Rng determinism and fork independence") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) REQUIRE(a.next_u64() == b.next_u64());
  Rng c(42);
  auto f1 = c.fork(1);
  Rng d(42);
  auto f2 = d.fork(2);
  CHECK(f1.next_u64() != f2.next_u64());
}

TEST_CASE("Rng below stays in range") {
  Rng rng(3);
  for (int i = 0; i < 1000; ++i) CHECK(rng.below(17) < 17);
}
