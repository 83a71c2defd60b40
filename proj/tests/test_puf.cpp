#include <catch_amalgamated.hpp>

#include <cmath>

#include "coma/puf.hpp"

using namespace coma;

namespace {

// Straight-line recomputation of the delay model: weights replayed from the
// documented seed contract, features computed position by position.
bool model_response(std::uint64_t device_seed, std::uint64_t challenge) {
  Rng wgen(device_seed);
  double w[65];
  for (auto& x : w) x = wgen.next_normal();
  double sum = w[64];
  for (int i = 0; i < 64; ++i) {
    double phi = 1.0;
    for (int j = i; j < 64; ++j)
      if ((challenge >> j) & 1) phi = -phi;
    sum += w[i] * phi;
  }
  return sum > 0;
}

// Oracle whose answers are fresh coin flips: no challenge is ever stable.
class CoinPuf : public PufOracle {
public:
  explicit CoinPuf(std::uint64_t seed) : rng_(seed) {}
  bool eval(std::uint64_t) override {
    ++n_;
    return rng_.next_bit();
  }
  std::uint64_t evals() const override { return n_; }

private:
  Rng rng_;
  std::uint64_t n_ = 0;
};

}  // namespace

TEST_CASE("noiseless arbiter matches the direct delay model") {
  ArbiterPuf puf(1234, 0.0);
  Rng rng(5);
  for (int i = 0; i < 500; ++i) {
    std::uint64_t c = rng.next_u64();
    REQUIRE(puf.eval(c) == model_response(1234, c));
  }
  CHECK(puf.evals() == 500);
}

TEST_CASE("arbiter responses are roughly balanced and device-unique") {
  ArbiterPuf a(1, 0.0), b(2, 0.0);
  Rng rng(9);
  int ones = 0, differ = 0;
  const int N = 4000;
  for (int i = 0; i < N; ++i) {
    std::uint64_t c = rng.next_u64();
    bool ra = a.eval(c);
    ones += ra;
    differ += (ra != b.eval(c));
  }
  CHECK(std::abs(ones / double(N) - 0.5) < 0.1);
  CHECK(std::abs(differ / double(N) - 0.5) < 0.1);
}

TEST_CASE("noise produces a small intra-device error rate") {
  ArbiterPuf puf(77, 0.25);
  Rng rng(3);
  int flips = 0;
  const int N = 2000;
  for (int i = 0; i < N; ++i) {
    std::uint64_t c = rng.next_u64();
    flips += (puf.eval(c) != puf.eval(c));
  }
  CHECK(flips > 0);          // noise is real
  CHECK(flips < N * 0.10);   // but rare
}

TEST_CASE("flip agreement follows the delay-model correlation profile") {
  // averaged over devices: agreement(k) ~ 1 - acos((63-2k)/65)/pi, falling
  // from near 1 at k=0 to near 0 at k=63
  const int devices = 5, N = 800;
  auto mean_agreement = [&](int k) {
    double acc = 0;
    for (int d = 0; d < devices; ++d) {
      ArbiterPuf puf(100 + d, 0.0);
      Rng rng(50 + d);
      int agree = 0;
      for (int i = 0; i < N; ++i) {
        std::uint64_t c = rng.next_u64();
        agree += (puf.eval(c) == puf.eval(c ^ (std::uint64_t{1} << k)));
      }
      acc += agree / double(N);
    }
    return acc / devices;
  };
  auto expect = [](int k) { return 1.0 - std::acos((63.0 - 2 * k) / 65.0) / M_PI; };
  for (int k : {0, 15, 31, 47, 63}) {
    INFO("flip position " << k);
    CHECK(std::abs(mean_agreement(k) - expect(k)) < 0.08);
  }
}

TEST_CASE("health check separates arbiter from pseudo") {
  for (int d = 0; d < 20; ++d) {
    ArbiterPuf real(500 + d);
    auto rep = puf_health_check(real, 42 + d, 128);
    INFO("arbiter device " << d << " maxdev " << rep.max_flip_deviation);
    CHECK(rep.genuine);
    PseudoPuf fake(500 + d);
    auto rep2 = puf_health_check(fake, 42 + d, 128);
    INFO("pseudo device " << d << " maxdev " << rep2.max_flip_deviation);
    CHECK(!rep2.genuine);
    CHECK(rep2.max_flip_deviation < 0.2);
  }
}

TEST_CASE("constant oracles are not genuine") {
  class Stuck : public PufOracle {
  public:
    bool eval(std::uint64_t) override { return ++n_, true; }
    std::uint64_t evals() const override { return n_; }

  private:
    std::uint64_t n_ = 0;
  } stuck;
  auto rep = puf_health_check(stuck, 1, 64);
  CHECK(!rep.genuine);
  CHECK(rep.bias > 0.99);
}

TEST_CASE("enrolled key re-derives exactly under noise") {
  ArbiterPuf puf(2024, 0.25);
  auto ek = enroll_key(puf, 0xdeadbeef12345678ull);
  REQUIRE(ek.counters.size() == 128);
  for (std::size_t i = 1; i < ek.counters.size(); ++i)
    REQUIRE(ek.counters[i] > ek.counters[i - 1]);
  for (int round = 0; round < 3; ++round)
    CHECK(rederive_key(puf, 0xdeadbeef12345678ull, ek.counters) == ek.key);
  // the helper data is useless with another device
  ArbiterPuf other(2025, 0.25);
  CHECK(rederive_key(other, 0xdeadbeef12345678ull, ek.counters) != ek.key);
}

TEST_CASE("hopelessly unstable oracle raises KeyInstability") {
  CoinPuf coin(8);
  CHECK_THROWS_AS(enroll_key(coin, 1, 15, 11, 512), KeyInstability);
}

TEST_CASE("one-shot sealed readout") {
  ArbiterPuf puf(31337, 0.25);
  EnrollmentAuthority authority;
  PufReadout readout(puf);
  auto enr = readout.seal_key(0x1111, authority.public_key());
  Key128 at_server = authority.unseal(enr.sealed);
  CHECK(rederive_key(puf, 0x1111, enr.counters) == at_server);
  // the latch only opens once
  CHECK_THROWS_AS(readout.seal_key(0x1111, authority.public_key()), ReadoutDisabled);
  // a corrupted blob does not decrypt
  auto bad = enr.sealed;
  bad.ct[4] ^= 0x80;
  CHECK_THROWS_AS(authority.unseal(bad), AuthFailure);
}
