#pragma once
// Oracle-guided attacks against a configured switching network: SAT-based
// key extraction over the exported netlist, linear-algebraic recovery of the
// affine map a fixed key induces, and the safe key-update period those attack
// bounds imply.

#include <chrono>
#include <cstdint>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "coma/bitvec.hpp"
#include "coma/gf2.hpp"
#include "coma/netlist.hpp"
#include "coma/rand.hpp"
#include "coma/sat.hpp"
#include "coma/switchnet.hpp"

namespace coma {

// x -> y under the hidden key; one call per distinguishing input.
using CsnOracle = std::function<BitVec(const BitVec&)>;

namespace detail {

// CNF builder over netlist signals. A pinned constant-true variable lets
// gate emission stay literal-only: the solver's root-level simplification
// folds constant inputs out of emitted clauses, and the alias cases below
// keep constant or duplicated inputs from spending fresh variables.
class CircuitEncoder {
public:
  explicit CircuitEncoder(SatSolver& s) : s_(s), tru_(s.new_var()) { s_.add_clause({tru_}); }

  int lit_true() const { return tru_; }
  int lit_const(bool v) const { return v ? tru_ : -tru_; }
  int fresh() { return s_.new_var(); }

  int emit_xor(int a, int b) {
    if (a == tru_) return -b;
    if (a == -tru_) return b;
    if (b == tru_) return -a;
    if (b == -tru_) return a;
    if (a == b) return -tru_;
    if (a == -b) return tru_;
    int o = s_.new_var();
    s_.add_clause({-a, -b, -o});
    s_.add_clause({a, b, -o});
    s_.add_clause({a, -b, o});
    s_.add_clause({-a, b, o});
    return o;
  }

  int emit_mux(int sel, int a, int b) {  // sel ? b : a
    if (sel == tru_) return b;
    if (sel == -tru_) return a;
    if (a == b) return a;
    if (a == -tru_ && b == tru_) return sel;
    if (a == tru_ && b == -tru_) return -sel;
    int o = s_.new_var();
    s_.add_clause({-sel, -b, o});
    s_.add_clause({-sel, b, -o});
    s_.add_clause({sel, -a, o});
    s_.add_clause({sel, a, -o});
    // redundant but propagation-friendly: equal data inputs decide the output
    s_.add_clause({-a, -b, o});
    s_.add_clause({a, b, -o});
    return o;
  }

  // Instantiate one copy of the netlist over the given input/key literals.
  std::vector<int> instantiate(const Netlist& nl, const std::vector<int>& in_lits,
                               const std::vector<int>& key_lits) {
    std::vector<int> val(nl.signal_count, 0);
    for (std::size_t i = 0; i < nl.inputs.size(); ++i) val[nl.inputs[i]] = in_lits[i];
    for (std::size_t j = 0; j < nl.keys.size(); ++j) val[nl.keys[j]] = key_lits[j];
    for (const Netlist::Gate& g : nl.gates) {
      switch (g.type) {
        case Netlist::GateType::mux:
          val[g.out] = emit_mux(val[g.in0], val[g.in1], val[g.in2]);
          break;
        case Netlist::GateType::xor_gate:
          val[g.out] = emit_xor(val[g.in0], val[g.in1]);
          break;
        case Netlist::GateType::buf:
          val[g.out] = val[g.in0];
          break;
      }
    }
    std::vector<int> out(nl.outputs.size());
    for (std::size_t i = 0; i < nl.outputs.size(); ++i) out[i] = val[nl.outputs[i]];
    return out;
  }

  // Pin one observed input/output pair for the given key variables.
  void constrain_pair(const Netlist& nl, const std::vector<int>& key_lits, const BitVec& x,
                      const BitVec& y) {
    std::vector<int> in_lits(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) in_lits[i] = lit_const(x.get(i));
    std::vector<int> out = instantiate(nl, in_lits, key_lits);
    for (std::size_t i = 0; i < out.size(); ++i) s_.add_clause({y.get(i) ? out[i] : -out[i]});
  }

private:
  SatSolver& s_;
  int tru_;
};

}  // namespace detail

struct SatAttackResult {
  enum class Outcome { key_found, timeout };
  Outcome outcome = Outcome::timeout;
  BitVec key;  // functionally equivalent to the hidden key when key_found
  std::uint64_t iterations = 0;  // distinguishing-input queries
  double seconds = 0.0;
};

// Classic oracle-guided attack: a miter of two key-differentiated copies
// proposes inputs where some pair of keys still disagrees; each oracle answer
// pins both copies until no disagreeing key pair is left, at which point any
// key consistent with the recorded history is functionally equivalent.
inline SatAttackResult sat_extract_key(const Netlist& nl, const CsnOracle& oracle,
                                       std::chrono::milliseconds timeout =
                                           std::chrono::milliseconds(600000)) {
  auto t0 = SatSolver::Clock::now();
  auto deadline = t0 + timeout;
  auto elapsed = [&] {
    return std::chrono::duration<double>(SatSolver::Clock::now() - t0).count();
  };

  std::size_t n = nl.inputs.size(), nk = nl.keys.size();

  SatSolver miter;
  detail::CircuitEncoder enc(miter);
  std::vector<int> x(n), k1(nk), k2(nk);
  for (auto& v : x) v = enc.fresh();
  for (auto& v : k1) v = enc.fresh();
  for (auto& v : k2) v = enc.fresh();
  std::vector<int> o1 = enc.instantiate(nl, x, k1);
  std::vector<int> o2 = enc.instantiate(nl, x, k2);
  std::vector<int> diff(n);
  for (std::size_t i = 0; i < n; ++i) diff[i] = enc.emit_xor(o1[i], o2[i]);
  miter.add_clause(diff);  // some output bit disagrees

  // Separate accumulator for the final key: only the recorded history, no
  // miter, so its model is any history-consistent key.
  SatSolver finder;
  detail::CircuitEncoder fenc(finder);
  std::vector<int> kk(nk);
  for (auto& v : kk) v = fenc.fresh();

  SatAttackResult res;
  for (;;) {
    SatSolver::Result r = miter.solve(deadline);
    if (r == SatSolver::Result::unknown) {
      res.seconds = elapsed();
      return res;  // timeout, iterations so far
    }
    if (r == SatSolver::Result::unsat) break;
    ++res.iterations;
    BitVec xs(n);
    for (std::size_t i = 0; i < n; ++i) xs.set(i, miter.value(x[i]));
    BitVec ys = oracle(xs);
    enc.constrain_pair(nl, k1, xs, ys);
    enc.constrain_pair(nl, k2, xs, ys);
    fenc.constrain_pair(nl, kk, xs, ys);
  }

  if (finder.solve(deadline) != SatSolver::Result::sat) {
    res.seconds = elapsed();
    return res;  // deadline hit while extracting the model
  }
  res.key = BitVec(nk);
  for (std::size_t j = 0; j < nk; ++j) res.key.set(j, finder.value(kk[j]));
  res.outcome = SatAttackResult::Outcome::key_found;
  res.seconds = elapsed();
  return res;
}

struct AffineModel {
  gf2::Matrix A;
  BitVec b;

  BitVec apply(const BitVec& x) const { return A.mul(x) ^ b; }
};

enum class AffineStatus { ok, underdetermined, inconsistent };

inline const char* to_string(AffineStatus s) {
  switch (s) {
    case AffineStatus::ok: return "ok";
    case AffineStatus::underdetermined: return "underdetermined";
    case AffineStatus::inconsistent: return "inconsistent";
  }
  return "?";
}

struct AffineResult {
  AffineStatus status = AffineStatus::underdetermined;
  AffineModel model;  // valid only when status == ok
};

// Fit y = A x ^ b to observed pairs gathered under one claimed fixed key.
// With the chosen inputs {0, e_0..e_{n-1}} present the map is read off
// directly (b = f(0), column i = f(e_i) ^ b); otherwise each output row is a
// GF(2) least-constraints solve. A key change inside the sample shows up as
// an inconsistent system, never as a bad model.
inline AffineResult affine_recover(const std::vector<std::pair<BitVec, BitVec>>& pairs) {
  AffineResult res;
  if (pairs.empty()) return res;
  std::size_t n = pairs[0].first.size();

  auto verify = [&](const AffineModel& m) {
    for (const auto& [px, py] : pairs)
      if (m.apply(px) != py) return false;
    return true;
  };

  // chosen-plaintext shortcut
  const BitVec* y0 = nullptr;
  std::vector<const BitVec*> ye(n, nullptr);
  for (const auto& [px, py] : pairs) {
    std::size_t ones = 0, at = 0;
    for (std::size_t i = 0; i < n; ++i)
      if (px.get(i)) {
        ++ones;
        at = i;
      }
    if (ones == 0) y0 = &py;
    else if (ones == 1) ye[at] = &py;
  }
  bool shortcut = y0 != nullptr;
  for (std::size_t i = 0; shortcut && i < n; ++i) shortcut = ye[i] != nullptr;
  if (shortcut) {
    AffineModel m{gf2::Matrix(n, n), *y0};
    for (std::size_t i = 0; i < n; ++i) {
      BitVec col = *ye[i] ^ *y0;
      for (std::size_t r = 0; r < n; ++r) m.A.set(r, i, col.get(r));
    }
    if (!verify(m)) return {AffineStatus::inconsistent, {}};
    return {AffineStatus::ok, std::move(m)};
  }

  // general case: per output row r, unknowns are the n row coefficients and
  // the constant, equations one per pair
  AffineModel m{gf2::Matrix(n, n), BitVec(n)};
  bool underdetermined = false;
  for (std::size_t r = 0; r < n; ++r) {
    std::vector<BitVec> rows;
    rows.reserve(pairs.size());
    for (const auto& [px, py] : pairs) {
      BitVec row(n + 2);
      for (std::size_t i = 0; i < n; ++i) row.set(i, px.get(i));
      row.set(n, true);  // coefficient of b_r
      row.set(n + 1, py.get(r));
      rows.push_back(std::move(row));
    }
    gf2::SolveResult sr = gf2::solve(std::move(rows), n + 1);
    if (sr.status == gf2::SolveStatus::inconsistent) return {AffineStatus::inconsistent, {}};
    if (sr.status == gf2::SolveStatus::underdetermined) {
      underdetermined = true;
      continue;
    }
    for (std::size_t i = 0; i < n; ++i) m.A.set(r, i, sr.solution.get(i));
    m.b.set(r, sr.solution.get(n));
  }
  if (underdetermined) return res;
  if (!verify(m)) return {AffineStatus::inconsistent, {}};
  return {AffineStatus::ok, std::move(m)};
}

// Key-update period window: at least the refill latency, and strictly fewer
// blocks than both the width n (each use leaks one affine relation) and the
// fastest observed SAT attack. No SAT bound (timeout) caps only at n.
struct UpdatePeriod {
  std::uint64_t lo = 0, hi = 0;
  bool feasible = false;
};

inline UpdatePeriod safe_update_period(std::uint32_t n, std::uint64_t refill_cycles,
                                       std::optional<std::uint64_t> sat_iterations) {
  std::uint64_t bound = n;
  if (sat_iterations && *sat_iterations < bound) bound = *sat_iterations;
  UpdatePeriod u;
  u.lo = refill_cycles;
  u.hi = bound == 0 ? 0 : bound - 1;
  u.feasible = bound >= 1 && u.lo <= u.hi;
  return u;
}

struct AttackSweepRow {
  std::uint32_t size = 0;
  NetworkKind kind = NetworkKind::omega;
  std::uint64_t iterations = 0;
  double seconds = 0.0;
  std::string outcome;  // "key", "timeout", "mismatch"
};

// One SAT attack per (size, kind) against a fresh random key; the recovered
// key is replayed on random inputs before it counts as broken.
inline std::vector<AttackSweepRow> attack_sweep(const std::vector<std::uint32_t>& sizes,
                                                const std::vector<NetworkKind>& kinds,
                                                std::uint64_t seed,
                                                std::chrono::milliseconds timeout,
                                                std::size_t verify_inputs = 1000) {
  std::vector<AttackSweepRow> rows;
  for (std::uint32_t n : sizes)
    for (NetworkKind kind : kinds) {
      NetworkTopology t = build_network(n, kind);
      Rng rng(seed ^ (std::uint64_t{n} << 8) ^ static_cast<std::uint64_t>(kind));
      Trn hidden(t, rng.next_bits(t.config_bits()));
      std::uint64_t queries = 0;
      CsnOracle oracle = [&](const BitVec& in) {
        ++queries;
        return csn_forward(t, hidden, in);
      };
      SatAttackResult r = sat_extract_key(to_netlist(t), oracle, timeout);
      AttackSweepRow row{n, kind, r.iterations, r.seconds, "timeout"};
      if (r.outcome == SatAttackResult::Outcome::key_found) {
        Trn got(t, r.key);
        row.outcome = "key";
        for (std::size_t q = 0; q < verify_inputs; ++q) {
          BitVec in = rng.next_bits(n);
          if (csn_forward(t, got, in) != csn_forward(t, hidden, in)) {
            row.outcome = "mismatch";
            break;
          }
        }
      }
      rows.push_back(std::move(row));
    }
  return rows;
}

inline std::string attack_sweep_csv(const std::vector<AttackSweepRow>& rows) {
  std::ostringstream os;
  os << "size,kind,iterations,seconds,outcome\n";
  os.setf(std::ios::fixed);
  os.precision(3);
  for (const AttackSweepRow& r : rows)
    os << r.size << ',' << to_string(r.kind) << ',' << r.iterations << ',' << r.seconds << ','
       << r.outcome << '\n';
  return os.str();
}

}  // namespace coma
