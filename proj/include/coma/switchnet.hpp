#pragma once

#include <cstdint>
#include <set>
#include <stdexcept>
#include <vector>

#include "coma/bitvec.hpp"

namespace coma {

// One re-routing block: a 2x2 switch with optional inversion on each output.
// Exactly 3 configuration bits, so a whole network of R blocks consumes 3R
// TRN bits.
struct RrbConfig {
  bool swap = false;
  bool invert_out0 = false;
  bool invert_out1 = false;
};

enum class NetworkKind { omega, log_extra_stage };

inline const char* to_string(NetworkKind k) {
  return k == NetworkKind::omega ? "blk" : "nonblk";
}

// A multistage switching network: each stage is an inter-stage wiring
// permutation followed by a column of n/2 RRBs pairing lines (0,1),(2,3),...
// Immutable after construction; evaluation is a pure function of (trn, x).
class NetworkTopology {
public:
  struct Stage {
    // wiring[j] = index of the previous-stage line feeding RRB-input line j
    std::vector<std::uint32_t> wiring;
  };

  // output_map[p] = last-stage line read by output p, chosen at build time so
  // that the all-zero configuration is the identity map.
  NetworkTopology(std::uint32_t n, NetworkKind kind, std::vector<Stage> stages)
      : n_(n), kind_(kind), stages_(std::move(stages)) {
    std::vector<std::uint32_t> line(n_);
    for (std::uint32_t i = 0; i < n_; ++i) line[i] = i;
    std::vector<std::uint32_t> next(n_);
    for (const auto& st : stages_) {
      for (std::uint32_t j = 0; j < n_; ++j) next[j] = line[st.wiring[j]];
      line.swap(next);
    }
    output_map_.resize(n_);
    for (std::uint32_t j = 0; j < n_; ++j) output_map_[line[j]] = j;
  }

  std::uint32_t width() const { return n_; }
  NetworkKind kind() const { return kind_; }
  std::size_t stage_count() const { return stages_.size(); }
  const std::vector<Stage>& stages() const { return stages_; }
  const std::vector<std::uint32_t>& output_map() const { return output_map_; }
  std::size_t rrb_count() const { return stages_.size() * (n_ / 2); }
  std::size_t config_bits() const { return 3 * rrb_count(); }

private:
  std::uint32_t n_;
  NetworkKind kind_;
  std::vector<Stage> stages_;
  std::vector<std::uint32_t> output_map_;
};

// TRN layout: stage-major, then RRB index within the stage, then
// (swap, invert_out0, invert_out1).
struct Trn {
  BitVec bits;

  Trn() = default;
  Trn(const NetworkTopology& t, BitVec b) : bits(std::move(b)) {
    if (bits.size() != t.config_bits())
      throw std::invalid_argument("Trn: length does not match topology");
  }

  RrbConfig rrb(std::size_t stage, std::size_t block, std::uint32_t n) const {
    std::size_t base = 3 * (stage * (n / 2) + block);
    return {bits.get(base), bits.get(base + 1), bits.get(base + 2)};
  }
};

namespace detail {

inline std::uint32_t log2_exact(std::uint32_t n) {
  std::uint32_t k = 0;
  while ((1u << k) < n) ++k;
  return k;
}

inline bool power_of_two(std::uint32_t n) { return n != 0 && (n & (n - 1)) == 0; }

// Perfect-shuffle wiring in source form: line j is fed by rotr(j).
inline NetworkTopology::Stage shuffle_stage(std::uint32_t n) {
  std::uint32_t k = log2_exact(n);
  NetworkTopology::Stage s;
  s.wiring.resize(n);
  for (std::uint32_t j = 0; j < n; ++j)
    s.wiring[j] = (j >> 1) | ((j & 1u) << (k - 1));
  return s;
}

}  // namespace detail

// Omega network: log2(n) shuffle-exchange stages, n/2 RRBs each (blocking).
inline NetworkTopology build_omega(std::uint32_t n) {
  if (!detail::power_of_two(n) || n < 4)
    throw std::invalid_argument("build_omega: n must be a power of 2, n >= 4");
  std::uint32_t k = detail::log2_exact(n);
  std::vector<NetworkTopology::Stage> stages(k, detail::shuffle_stage(n));
  return NetworkTopology(n, NetworkKind::omega, std::move(stages));
}

// Close-to-non-blocking LOG network: the Omega network extended with
// log2(n)-2 extra shuffle-exchange stages, 2*log2(n)-2 stages total and
// n*(log2(n)-1) RRBs. For n=4 the extra-stage count is zero and the
// structure coincides with the Omega network.
inline NetworkTopology build_near_nonblocking(std::uint32_t n) {
  if (!detail::power_of_two(n) || n < 4)
    throw std::invalid_argument("build_near_nonblocking: n must be a power of 2, n >= 4");
  std::uint32_t k = detail::log2_exact(n);
  std::vector<NetworkTopology::Stage> stages(2 * k - 2, detail::shuffle_stage(n));
  return NetworkTopology(n, NetworkKind::log_extra_stage, std::move(stages));
}

inline NetworkTopology build_network(std::uint32_t n, NetworkKind kind) {
  return kind == NetworkKind::omega ? build_omega(n) : build_near_nonblocking(n);
}

// Forward pass through the CSN. With an all-zero TRN every stage routes
// straight with no inversion, so the network is the identity map.
inline BitVec csn_forward(const NetworkTopology& t, const Trn& trn, const BitVec& x) {
  std::uint32_t n = t.width();
  if (trn.bits.size() != t.config_bits())
    throw std::invalid_argument("csn_forward: trn length mismatch");
  if (x.size() != n) throw std::invalid_argument("csn_forward: word width mismatch");
  BitVec cur = x;
  BitVec next(n);
  for (std::size_t s = 0; s < t.stage_count(); ++s) {
    const auto& wiring = t.stages()[s].wiring;
    for (std::uint32_t m = 0; m < n / 2; ++m) {
      bool a = cur.get(wiring[2 * m]);
      bool b = cur.get(wiring[2 * m + 1]);
      RrbConfig c = trn.rrb(s, m, n);
      bool o0 = (c.swap ? b : a) ^ c.invert_out0;
      bool o1 = (c.swap ? a : b) ^ c.invert_out1;
      next.set(2 * m, o0);
      next.set(2 * m + 1, o1);
    }
    std::swap(cur, next);
  }
  const auto& omap = t.output_map();
  BitVec y(n);
  for (std::uint32_t p = 0; p < n; ++p) y.set(p, cur.get(omap[p]));
  return y;
}

// Exact inverse of csn_forward under the same TRN: stages run in reverse,
// each RRB un-inverts then un-swaps, then the wiring is undone.
inline BitVec rcsn_backward(const NetworkTopology& t, const Trn& trn, const BitVec& y) {
  std::uint32_t n = t.width();
  if (trn.bits.size() != t.config_bits())
    throw std::invalid_argument("rcsn_backward: trn length mismatch");
  if (y.size() != n) throw std::invalid_argument("rcsn_backward: word width mismatch");
  const auto& omap = t.output_map();
  BitVec cur(n);
  for (std::uint32_t p = 0; p < n; ++p) cur.set(omap[p], y.get(p));
  BitVec prev(n);
  for (std::size_t s = t.stage_count(); s-- > 0;) {
    const auto& wiring = t.stages()[s].wiring;
    for (std::uint32_t m = 0; m < n / 2; ++m) {
      RrbConfig c = trn.rrb(s, m, n);
      bool o0 = cur.get(2 * m) ^ c.invert_out0;
      bool o1 = cur.get(2 * m + 1) ^ c.invert_out1;
      bool a = c.swap ? o1 : o0;
      bool b = c.swap ? o0 : o1;
      prev.set(wiring[2 * m], a);
      prev.set(wiring[2 * m + 1], b);
    }
    std::swap(cur, prev);
  }
  return cur;
}

// Circular left rotation of the TRN bits; the LCC schedule applies k=1 per
// encrypted block.
inline Trn shift_trn(const Trn& trn, std::size_t k) {
  Trn out;
  out.bits = trn.bits.rotl(k);
  return out;
}

// Exhaustive count of distinct input->output permutations over all swap-bit
// settings (inversion bits held at zero). Feasible for n <= 8 only.
inline std::uint64_t enumerate_permutations(const NetworkTopology& t) {
  std::uint32_t n = t.width();
  if (n > 8) throw std::invalid_argument("enumerate_permutations: n > 8 not exhaustible");
  std::size_t nrrb = t.rrb_count();
  std::set<std::uint64_t> seen;
  std::vector<std::uint32_t> line(n), nextline(n);
  for (std::uint64_t setting = 0; setting < (std::uint64_t{1} << nrrb); ++setting) {
    for (std::uint32_t i = 0; i < n; ++i) line[i] = i;
    std::size_t idx = 0;
    for (std::size_t s = 0; s < t.stage_count(); ++s) {
      const auto& wiring = t.stages()[s].wiring;
      for (std::uint32_t m = 0; m < n / 2; ++m) {
        std::uint32_t a = line[wiring[2 * m]];
        std::uint32_t b = line[wiring[2 * m + 1]];
        bool swap = (setting >> idx++) & 1;
        nextline[2 * m] = swap ? b : a;
        nextline[2 * m + 1] = swap ? a : b;
      }
      std::swap(line, nextline);
    }
    // encode permutation input->output as packed 4-bit digits
    const auto& omap = t.output_map();
    std::uint64_t code = 0;
    for (std::uint32_t p = 0; p < n; ++p) code |= std::uint64_t{p} << (4 * line[omap[p]]);
    seen.insert(code);
  }
  return seen.size();
}

}  // namespace coma
