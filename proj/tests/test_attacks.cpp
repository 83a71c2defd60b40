#include <catch_amalgamated.hpp>

#include <chrono>

#include "coma/attacks.hpp"
#include "coma/sat.hpp"

using namespace coma;
using namespace std::chrono_literals;

TEST_CASE("solver agrees with brute force on small random formulas") {
  Rng rng(0xc0ffee);
  for (int trial = 0; trial < 60; ++trial) {
    const int nv = 8;
    int nc = 20 + static_cast<int>(rng.below(20));
    std::vector<std::vector<int>> formula;
    for (int c = 0; c < nc; ++c) {
      std::vector<int> cl;
      for (int k = 0; k < 3; ++k) {
        int v = 1 + static_cast<int>(rng.below(nv));
        cl.push_back(rng.next_bit() ? v : -v);
      }
      formula.push_back(cl);
    }
    bool brute_sat = false;
    for (unsigned m = 0; m < (1u << nv) && !brute_sat; ++m) {
      bool all = true;
      for (const auto& cl : formula) {
        bool any = false;
        for (int l : cl) any |= ((m >> (std::abs(l) - 1)) & 1u) == (l > 0 ? 1u : 0u);
        if (!any) {
          all = false;
          break;
        }
      }
      brute_sat = all;
    }
    SatSolver s;
    for (int v = 0; v < nv; ++v) s.new_var();
    for (auto& cl : formula) s.add_clause(cl);
    SatSolver::Result r = s.solve();
    INFO("trial " << trial);
    REQUIRE(r == (brute_sat ? SatSolver::Result::sat : SatSolver::Result::unsat));
    if (r == SatSolver::Result::sat) {
      for (const auto& cl : formula) {
        bool any = false;
        for (int l : cl) any |= s.value(std::abs(l)) == (l > 0);
        CHECK(any);
      }
    }
  }
}

TEST_CASE("solver handles units, duplicates and tautologies") {
  SatSolver s;
  int a = s.new_var(), b = s.new_var();
  s.add_clause({a, a, -b, b});  // tautology, dropped
  s.add_clause({a});
  s.add_clause({-a, b});
  REQUIRE(s.solve() == SatSolver::Result::sat);
  CHECK(s.value(a));
  CHECK(s.value(b));
  s.add_clause({-b});
  CHECK(s.solve() == SatSolver::Result::unsat);
  CHECK(s.solve() == SatSolver::Result::unsat);  // stays unsat
}

namespace {

SatAttackResult attack_network(std::uint32_t n, NetworkKind kind, std::uint64_t seed,
                               std::uint64_t* oracle_queries = nullptr,
                               std::chrono::milliseconds timeout = 60000ms) {
  NetworkTopology t = build_network(n, kind);
  Rng rng(seed);
  Trn hidden(t, rng.next_bits(t.config_bits()));
  std::uint64_t queries = 0;
  CsnOracle oracle = [&, hidden](const BitVec& x) {
    ++queries;
    return csn_forward(t, hidden, x);
  };
  SatAttackResult r = sat_extract_key(to_netlist(t), oracle, timeout);
  if (r.outcome == SatAttackResult::Outcome::key_found) {
    Trn got(t, r.key);
    Rng vr(seed + 1);
    for (int q = 0; q < 1000; ++q) {
      BitVec x = vr.next_bits(n);
      REQUIRE(csn_forward(t, got, x) == csn_forward(t, hidden, x));
    }
  }
  if (oracle_queries) *oracle_queries = queries;
  return r;
}

}  // namespace

TEST_CASE("SAT extraction recovers an equivalent key") {
  std::uint64_t queries = 0;
  SatAttackResult r = attack_network(4, NetworkKind::omega, 11, &queries);
  REQUIRE(r.outcome == SatAttackResult::Outcome::key_found);
  CHECK(r.iterations >= 1);
  CHECK(queries == r.iterations);  // one oracle query per distinguishing input

  SatAttackResult r2 = attack_network(8, NetworkKind::log_extra_stage, 12);
  REQUIRE(r2.outcome == SatAttackResult::Outcome::key_found);
}

TEST_CASE("extra stages cost the attacker more distinguishing inputs") {
  // medians over a few hidden keys so a lucky draw cannot flip the trend
  auto median_iters = [](std::uint32_t n, NetworkKind kind) {
    std::vector<std::uint64_t> its;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      SatAttackResult r = attack_network(n, kind, seed * 977);
      REQUIRE(r.outcome == SatAttackResult::Outcome::key_found);
      its.push_back(r.iterations);
    }
    std::sort(its.begin(), its.end());
    return its[its.size() / 2];
  };
  for (std::uint32_t n : {8u, 16u}) {
    INFO("width " << n);
    CHECK(median_iters(n, NetworkKind::log_extra_stage) > median_iters(n, NetworkKind::omega));
  }
}

TEST_CASE("blocking width-16 attack finishes fast") {
  auto t0 = std::chrono::steady_clock::now();
  SatAttackResult r = attack_network(16, NetworkKind::omega, 5);
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  REQUIRE(r.outcome == SatAttackResult::Outcome::key_found);
  CHECK(r.iterations <= 20);
  CHECK(secs < 60.0);
}

TEST_CASE("tiny timeout reports progress instead of a key") {
  NetworkTopology t = build_network(16, NetworkKind::log_extra_stage);
  Rng rng(3);
  Trn hidden(t, rng.next_bits(t.config_bits()));
  CsnOracle oracle = [&](const BitVec& x) { return csn_forward(t, hidden, x); };
  SatAttackResult r = sat_extract_key(to_netlist(t), oracle, 0ms);
  CHECK(r.outcome == SatAttackResult::Outcome::timeout);
}

namespace {

std::vector<std::pair<BitVec, BitVec>> chosen_pairs(const NetworkTopology& t, const Trn& trn) {
  std::uint32_t n = t.width();
  std::vector<std::pair<BitVec, BitVec>> pairs;
  BitVec zero(n);
  pairs.emplace_back(zero, csn_forward(t, trn, zero));
  for (std::uint32_t i = 0; i < n; ++i) {
    BitVec e(n);
    e.set(i, true);
    pairs.emplace_back(e, csn_forward(t, trn, e));
  }
  return pairs;
}

}  // namespace

TEST_CASE("affine recovery from chosen plaintexts decrypts fresh blocks") {
  for (std::uint32_t n : {4u, 8u}) {
    INFO("width " << n);
    NetworkTopology t = build_network(n, n == 4 ? NetworkKind::omega : NetworkKind::log_extra_stage);
    Rng rng(19 + n);
    Trn trn(t, rng.next_bits(t.config_bits()));
    AffineResult ar = affine_recover(chosen_pairs(t, trn));
    REQUIRE(ar.status == AffineStatus::ok);
    BitVec zero(n);
    CHECK(ar.model.b == csn_forward(t, trn, zero));  // b is f(0)
    for (int q = 0; q < 1000; ++q) {
      BitVec x = rng.next_bits(n);
      CHECK(ar.model.apply(x) == csn_forward(t, trn, x));
    }
  }
}

TEST_CASE("affine recovery works from generic pairs too") {
  NetworkTopology t = build_network(8, NetworkKind::omega);
  Rng rng(77);
  Trn trn(t, rng.next_bits(t.config_bits()));
  std::vector<std::pair<BitVec, BitVec>> pairs;
  for (int q = 0; q < 24; ++q) {
    BitVec x = rng.next_bits(8);
    pairs.emplace_back(x, csn_forward(t, trn, x));
  }
  AffineResult ar = affine_recover(pairs);
  REQUIRE(ar.status == AffineStatus::ok);
  for (int q = 0; q < 100; ++q) {
    BitVec x = rng.next_bits(8);
    CHECK(ar.model.apply(x) == csn_forward(t, trn, x));
  }
}

TEST_CASE("too few pairs is underdetermined, never a guess") {
  NetworkTopology t = build_network(8, NetworkKind::omega);
  Rng rng(78);
  Trn trn(t, rng.next_bits(t.config_bits()));
  std::vector<std::pair<BitVec, BitVec>> pairs;
  for (int q = 0; q < 7; ++q) {  // n-1 pairs
    BitVec x = rng.next_bits(8);
    pairs.emplace_back(x, csn_forward(t, trn, x));
  }
  CHECK(affine_recover(pairs).status == AffineStatus::underdetermined);
  CHECK(affine_recover({}).status == AffineStatus::underdetermined);
}

TEST_CASE("a key shift inside the sample is flagged inconsistent") {
  NetworkTopology t = build_network(8, NetworkKind::omega);
  int flagged = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(0x5eed0 + seed);
    Trn trn(t, rng.next_bits(t.config_bits()));
    std::vector<std::pair<BitVec, BitVec>> pairs = chosen_pairs(t, trn);
    Trn shifted = shift_trn(trn, 1);
    for (int q = 0; q < 16; ++q) {
      BitVec x = rng.next_bits(8);
      pairs.emplace_back(x, csn_forward(t, shifted, x));
    }
    if (affine_recover(pairs).status == AffineStatus::inconsistent) ++flagged;
  }
  CHECK(flagged == 100);
}

TEST_CASE("safe update period window") {
  UpdatePeriod u = safe_update_period(64, 15, 14);  // blocking fell in 14 iterations
  CHECK(!u.feasible);

  u = safe_update_period(64, 15, std::nullopt);  // attack timed out, width caps
  CHECK(u.feasible);
  CHECK(u.lo == 15);
  CHECK(u.hi == 63);

  u = safe_update_period(64, 0, 5);
  CHECK(u.feasible);
  CHECK(u.lo == 0);
  CHECK(u.hi == 4);

  CHECK(!safe_update_period(64, 3, 0).feasible);
}

TEST_CASE("attack sweep emits one verified row per size and kind") {
  std::vector<AttackSweepRow> rows = attack_sweep(
      {4, 8}, {NetworkKind::omega, NetworkKind::log_extra_stage}, 42, 60000ms, 200);
  REQUIRE(rows.size() == 4);
  for (const AttackSweepRow& r : rows) {
    INFO(r.size << " " << to_string(r.kind));
    CHECK(r.outcome == "key");
    CHECK(r.iterations >= 1);
  }
  std::string csv = attack_sweep_csv(rows);
  CHECK(csv.rfind("size,kind,iterations,seconds,outcome\n", 0) == 0);
  CHECK(csv.find("4,blk,") != std::string::npos);
  CHECK(csv.find("8,nonblk,") != std::string::npos);
}
