#pragma once
// Small CDCL propositional solver: two watched literals, activity-driven
// decisions with decay, first-UIP clause learning, phase saving, geometric
// restarts. External literals follow the DIMACS convention: variables are
// positive ints, a negated literal is the negative int. Instances here are
// desk-scale (tens of thousands of variables), so the learned-clause
// database is kept for the lifetime of the solve.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

namespace coma {

class SatSolver {
public:
  enum class Result { sat, unsat, unknown };

  using Clock = std::chrono::steady_clock;

  int new_var() {
    int v = static_cast<int>(nvars_++);
    assigns_.push_back(lbool_undef);
    phase_.push_back(false);
    activity_.push_back(0.0);
    level_.push_back(0);
    reason_.push_back(no_reason);
    seen_.push_back(0);
    watches_.emplace_back();
    watches_.emplace_back();
    heap_insert(static_cast<std::uint32_t>(v));
    return v + 1;
  }

  std::size_t var_count() const { return nvars_; }

  // Clauses may only be added between solves (decision level zero).
  void add_clause(std::vector<int> lits) {
    if (!ok_) return;
    std::vector<std::uint32_t> c;
    c.reserve(lits.size());
    std::sort(lits.begin(), lits.end(), [](int a, int b) {
      return std::abs(a) != std::abs(b) ? std::abs(a) < std::abs(b) : a < b;
    });
    int prev = 0;
    for (int l : lits) {
      if (l == 0 || static_cast<std::size_t>(std::abs(l)) > nvars_)
        throw std::invalid_argument("SatSolver: bad literal");
      if (l == prev) continue;   // duplicate
      if (l == -prev) return;    // tautology
      prev = l;
      std::uint32_t q = enc(l);
      lbool v = value(q);
      if (v == lbool_true) return;        // already satisfied at root
      if (v == lbool_false) continue;     // root-false literal drops out
      c.push_back(q);
    }
    if (c.empty()) {
      ok_ = false;
      return;
    }
    if (c.size() == 1) {
      enqueue(c[0], no_reason);
      ok_ = propagate() == no_clause;
      return;
    }
    attach(add(std::move(c)));
  }

  // Always leaves the solver at decision level zero, so clauses may be added
  // and solve() called again; a satisfying assignment is snapshotted first.
  Result solve(std::optional<Clock::time_point> deadline = std::nullopt) {
    if (!ok_) return Result::unsat;
    if (deadline && Clock::now() > *deadline) return Result::unknown;
    std::uint64_t restart_limit = 100;
    std::uint64_t conflicts_here = 0;
    for (;;) {
      std::uint32_t confl = propagate();
      if (confl != no_clause) {
        ++conflicts_;
        ++conflicts_here;
        if (decision_level() == 0) {
          ok_ = false;
          return Result::unsat;
        }
        std::vector<std::uint32_t> learnt;
        std::uint32_t back_level = 0;
        analyze(confl, learnt, back_level);
        cancel_until(back_level);
        if (learnt.size() == 1) {
          enqueue(learnt[0], no_reason);
        } else {
          std::uint32_t cref = add(std::move(learnt));
          attach(cref);
          enqueue(clauses_[cref][0], cref);
        }
        decay_activity();
        if ((conflicts_ & 255) == 0 && deadline && Clock::now() > *deadline) {
          cancel_until(0);
          return Result::unknown;
        }
      } else {
        if (conflicts_here >= restart_limit) {
          conflicts_here = 0;
          restart_limit = restart_limit + restart_limit / 2;
          cancel_until(0);
          continue;
        }
        std::uint32_t next = pick_branch();
        if (next == var_undef) {  // full assignment
          model_ = assigns_;
          cancel_until(0);
          return Result::sat;
        }
        trail_lim_.push_back(trail_.size());
        enqueue(mk_lit(next, !phase_[next]), no_reason);
      }
    }
  }

  // Model access after Result::sat.
  bool value(int var) const {
    std::uint32_t v = static_cast<std::uint32_t>(var - 1);
    return model_[v] == lbool_true;
  }

  std::uint64_t conflicts() const { return conflicts_; }

private:
  using lbool = std::int8_t;
  static constexpr lbool lbool_true = 1, lbool_false = -1, lbool_undef = 0;
  static constexpr std::uint32_t no_clause = 0xffffffffu;
  static constexpr std::uint32_t no_reason = 0xffffffffu;
  static constexpr std::uint32_t var_undef = 0xffffffffu;

  struct Watcher {
    std::uint32_t cref;
    std::uint32_t blocker;
  };

  // lit encoding: 2*var + (negated ? 1 : 0)
  static std::uint32_t enc(int l) {
    std::uint32_t v = static_cast<std::uint32_t>(std::abs(l)) - 1;
    return 2 * v + (l < 0 ? 1u : 0u);
  }
  static std::uint32_t mk_lit(std::uint32_t var, bool neg) { return 2 * var + (neg ? 1u : 0u); }
  static std::uint32_t neg(std::uint32_t lit) { return lit ^ 1u; }
  static std::uint32_t var_of(std::uint32_t lit) { return lit >> 1; }

  lbool value(std::uint32_t lit) const {
    lbool a = assigns_[var_of(lit)];
    return (lit & 1) ? static_cast<lbool>(-a) : a;
  }

  std::uint32_t decision_level() const { return static_cast<std::uint32_t>(trail_lim_.size()); }

  std::uint32_t add(std::vector<std::uint32_t> lits) {
    clauses_.push_back(std::move(lits));
    return static_cast<std::uint32_t>(clauses_.size() - 1);
  }

  void attach(std::uint32_t cref) {
    const auto& c = clauses_[cref];
    watches_[neg(c[0])].push_back({cref, c[1]});
    watches_[neg(c[1])].push_back({cref, c[0]});
  }

  void enqueue(std::uint32_t lit, std::uint32_t reason) {
    std::uint32_t v = var_of(lit);
    assigns_[v] = (lit & 1) ? lbool_false : lbool_true;
    level_[v] = decision_level();
    reason_[v] = reason;
    phase_[v] = !(lit & 1);
    trail_.push_back(lit);
  }

  std::uint32_t propagate() {
    while (qhead_ < trail_.size()) {
      std::uint32_t p = trail_[qhead_++];
      auto& ws = watches_[p];  // clauses watching ¬p just lost that watch
      std::size_t i = 0, j = 0;
      std::uint32_t conflict = no_clause;
      while (i < ws.size()) {
        Watcher w = ws[i];
        if (value(w.blocker) == lbool_true) {
          ws[j++] = ws[i++];
          continue;
        }
        auto& c = clauses_[w.cref];
        std::uint32_t false_lit = neg(p);
        if (c[0] == false_lit) std::swap(c[0], c[1]);
        ++i;
        if (value(c[0]) == lbool_true) {
          ws[j++] = {w.cref, c[0]};
          continue;
        }
        bool moved = false;
        for (std::size_t k = 2; k < c.size(); ++k) {
          if (value(c[k]) != lbool_false) {
            std::swap(c[1], c[k]);
            watches_[neg(c[1])].push_back({w.cref, c[0]});
            moved = true;
            break;
          }
        }
        if (moved) continue;
        // unit or conflicting
        ws[j++] = {w.cref, c[0]};
        if (value(c[0]) == lbool_false) {
          conflict = w.cref;
          while (i < ws.size()) ws[j++] = ws[i++];
        } else {
          enqueue(c[0], w.cref);
        }
      }
      ws.resize(j);
      if (conflict != no_clause) return conflict;
    }
    return no_clause;
  }

  void analyze(std::uint32_t confl, std::vector<std::uint32_t>& learnt,
               std::uint32_t& back_level) {
    learnt.assign(1, 0);  // slot for the asserting literal
    std::uint32_t path = 0;
    std::uint32_t p = var_undef;
    std::size_t index = trail_.size();
    do {
      const auto& c = clauses_[confl];
      for (std::size_t k = (p == var_undef ? 0 : 1); k < c.size(); ++k) {
        std::uint32_t v = var_of(c[k]);
        if (!seen_[v] && level_[v] > 0) {
          seen_[v] = 1;
          bump_activity(v);
          if (level_[v] >= decision_level())
            ++path;
          else
            learnt.push_back(c[k]);
        }
      }
      while (!seen_[var_of(trail_[--index])]) {
      }
      p = trail_[index];
      confl = reason_[var_of(p)];
      seen_[var_of(p)] = 0;
      --path;
    } while (path > 0);
    learnt[0] = neg(p);

    back_level = 0;
    std::size_t max_at = 1;
    for (std::size_t k = 1; k < learnt.size(); ++k) {
      std::uint32_t lv = level_[var_of(learnt[k])];
      if (lv > back_level) {
        back_level = lv;
        max_at = k;
      }
    }
    if (learnt.size() > 1) std::swap(learnt[1], learnt[max_at]);
    for (std::uint32_t l : learnt) seen_[var_of(l)] = 0;
  }

  void cancel_until(std::uint32_t lvl) {
    if (decision_level() <= lvl) return;
    std::size_t bound = trail_lim_[lvl];
    for (std::size_t k = trail_.size(); k-- > bound;) {
      std::uint32_t v = var_of(trail_[k]);
      assigns_[v] = lbool_undef;
      reason_[v] = no_reason;
      heap_insert(v);
    }
    trail_.resize(bound);
    trail_lim_.resize(lvl);
    qhead_ = bound;
  }

  std::uint32_t pick_branch() {
    while (!heap_.empty()) {
      std::uint32_t v = heap_pop();
      if (assigns_[v] == lbool_undef) return v;
    }
    return var_undef;
  }

  void bump_activity(std::uint32_t v) {
    activity_[v] += var_inc_;
    if (activity_[v] > 1e100) {
      for (double& a : activity_) a *= 1e-100;
      var_inc_ *= 1e-100;
      rebuild_heap();
    }
    heap_update(v);
  }

  void decay_activity() { var_inc_ /= 0.95; }

  // Binary max-heap over variables keyed by activity, with position index.
  void rebuild_heap() {
    std::vector<std::uint32_t> vars;
    for (std::uint32_t h : heap_) vars.push_back(h);
    heap_.clear();
    heap_pos_.assign(nvars_, var_undef);
    for (std::uint32_t v : vars) heap_insert(v);
  }

  bool heap_less(std::uint32_t a, std::uint32_t b) const { return activity_[a] < activity_[b]; }

  void heap_insert(std::uint32_t v) {
    if (heap_pos_.size() < nvars_) heap_pos_.resize(nvars_, var_undef);
    if (heap_pos_[v] != var_undef) return;
    heap_pos_[v] = static_cast<std::uint32_t>(heap_.size());
    heap_.push_back(v);
    sift_up(heap_pos_[v]);
  }

  void heap_update(std::uint32_t v) {
    if (heap_pos_.size() <= v || heap_pos_[v] == var_undef) return;
    sift_up(heap_pos_[v]);
  }

  std::uint32_t heap_pop() {
    std::uint32_t top = heap_[0];
    heap_pos_[top] = var_undef;
    if (heap_.size() > 1) {
      heap_[0] = heap_.back();
      heap_pos_[heap_[0]] = 0;
      heap_.pop_back();
      sift_down(0);
    } else {
      heap_.pop_back();
    }
    return top;
  }

  void sift_up(std::uint32_t i) {
    while (i > 0) {
      std::uint32_t parent = (i - 1) / 2;
      if (!heap_less(heap_[parent], heap_[i])) break;
      std::swap(heap_[parent], heap_[i]);
      heap_pos_[heap_[parent]] = parent;
      heap_pos_[heap_[i]] = i;
      i = parent;
    }
  }

  void sift_down(std::uint32_t i) {
    for (;;) {
      std::uint32_t l = 2 * i + 1, r = 2 * i + 2, m = i;
      if (l < heap_.size() && heap_less(heap_[m], heap_[l])) m = l;
      if (r < heap_.size() && heap_less(heap_[m], heap_[r])) m = r;
      if (m == i) break;
      std::swap(heap_[m], heap_[i]);
      heap_pos_[heap_[m]] = m;
      heap_pos_[heap_[i]] = i;
      i = m;
    }
  }

  std::size_t nvars_ = 0;
  bool ok_ = true;
  std::vector<std::vector<std::uint32_t>> clauses_;
  std::vector<std::vector<Watcher>> watches_;  // indexed by encoded literal
  std::vector<lbool> assigns_;
  std::vector<bool> phase_;
  std::vector<double> activity_;
  std::vector<std::uint32_t> level_;
  std::vector<std::uint32_t> reason_;
  std::vector<std::uint8_t> seen_;
  std::vector<lbool> model_;
  std::vector<std::uint32_t> trail_;
  std::vector<std::size_t> trail_lim_;
  std::size_t qhead_ = 0;
  std::vector<std::uint32_t> heap_;
  std::vector<std::uint32_t> heap_pos_;
  double var_inc_ = 1.0;
  std::uint64_t conflicts_ = 0;
};

}  // namespace coma
