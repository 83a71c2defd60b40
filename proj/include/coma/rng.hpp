#pragma once
// True-RNG source model and the two continuous health tests run on its raw
// output: repetition count and adaptive proportion. Cutoffs are derived for
// a false-alarm rate of 2^-20 per test; the binomial tail for the adaptive
// proportion cutoff is evaluated exactly in big-integer arithmetic.

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "coma/rand.hpp"
#include "coma/trivium.hpp"

namespace coma {

// Simulated free-running oscillator sampler: one raw bit per 20000 device
// cycles. Fault modes model the failures the health tests exist to catch.
class EntropySource {
public:
  static constexpr std::uint64_t cycles_per_bit = 20000;

  enum class Mode { ideal, biased, stuck_zero, stuck_one };

  explicit EntropySource(std::uint64_t seed, Mode mode = Mode::ideal, double bias = 0.5)
      : rng_(seed), mode_(mode), bias_(bias) {
    if (bias <= 0.0 || bias >= 1.0) throw std::invalid_argument("bias must be in (0,1)");
  }

  void set_mode(Mode m, double bias = 0.5) {
    mode_ = m;
    bias_ = bias;
  }

  bool next_bit() {
    cycles_ += cycles_per_bit;
    switch (mode_) {
      case Mode::ideal: return rng_.next_bit();
      case Mode::biased: return rng_.next_double() < bias_;
      case Mode::stuck_zero: return false;
      case Mode::stuck_one: return true;
    }
    return false;
  }

  std::uint64_t cycles_consumed() const { return cycles_; }

  // Gather a 128-bit PRNG seed from raw output (no conditioning; the model
  // source is full-entropy when healthy).
  std::array<std::uint8_t, 16> gather_seed() {
    std::array<std::uint8_t, 16> s{};
    for (int i = 0; i < 128; ++i)
      if (next_bit()) s[i / 8] |= static_cast<std::uint8_t>(1u << (i % 8));
    return s;
  }

private:
  Rng rng_;
  Mode mode_;
  double bias_;
  std::uint64_t cycles_ = 0;
};

namespace detail {

// Little-endian multiprecision unsigned integer; just enough for exact
// binomial tails (add, compare, power of two).
struct BigUint {
  std::vector<std::uint64_t> w;

  static BigUint zero() { return {}; }

  static BigUint pow2(unsigned bit) {
    BigUint b;
    b.w.assign(bit / 64 + 1, 0);
    b.w[bit / 64] = std::uint64_t{1} << (bit % 64);
    return b;
  }

  void add(const BigUint& o) {
    if (o.w.size() > w.size()) w.resize(o.w.size(), 0);
    unsigned __int128 carry = 0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      unsigned __int128 s = carry + w[i] + (i < o.w.size() ? o.w[i] : 0);
      w[i] = static_cast<std::uint64_t>(s);
      carry = s >> 64;
    }
    if (carry) w.push_back(static_cast<std::uint64_t>(carry));
  }

  // -1, 0, 1
  int cmp(const BigUint& o) const {
    std::size_t n = std::max(w.size(), o.w.size());
    for (std::size_t i = n; i-- > 0;) {
      std::uint64_t a = i < w.size() ? w[i] : 0;
      std::uint64_t b = i < o.w.size() ? o.w[i] : 0;
      if (a != b) return a < b ? -1 : 1;
    }
    return 0;
  }
};

}  // namespace detail

// Repetition count test: alarm once any value repeats cutoff times in a row.
// cutoff = 1 + ceil(20/H) for an assessed min-entropy of H bits per sample.
class RepetitionCountTest {
public:
  explicit RepetitionCountTest(double entropy_per_sample = 1.0)
      : cutoff_(1 + static_cast<std::uint32_t>(std::ceil(20.0 / entropy_per_sample))) {
    if (!(entropy_per_sample > 0.0) || entropy_per_sample > 1.0)
      throw std::invalid_argument("entropy per bit must be in (0,1]");
  }

  std::uint32_t cutoff() const { return cutoff_; }
  bool alarmed() const { return alarmed_; }

  // returns true exactly when this sample raises the (latched) alarm
  bool feed(bool bit) {
    if (have_last_ && bit == last_) {
      ++run_;
    } else {
      run_ = 1;
      last_ = bit;
      have_last_ = true;
    }
    if (run_ >= cutoff_ && !alarmed_) {
      alarmed_ = true;
      return true;
    }
    return false;
  }

  void reset() {
    alarmed_ = false;
    have_last_ = false;
    run_ = 0;
  }

private:
  std::uint32_t cutoff_;
  bool have_last_ = false, last_ = false, alarmed_ = false;
  std::uint32_t run_ = 0;
};

// Smallest C such that P[1 + Binomial(window-1, 1/2) >= C] <= 2^-alpha_log2,
// i.e. sum_{k=C-1}^{window-1} C(window-1, k) <= 2^(window-1-alpha_log2).
inline std::uint32_t adaptive_proportion_cutoff(std::uint32_t window,
                                                std::uint32_t alpha_log2 = 20) {
  if (window < 2 || alpha_log2 >= window - 1)
    throw std::invalid_argument("adaptive_proportion_cutoff: bad parameters");
  std::uint32_t n = window - 1;
  // Pascal's triangle row n, built in place highest-index first
  std::vector<detail::BigUint> row(n + 1);
  row[0] = detail::BigUint::pow2(0);
  for (std::uint32_t r = 1; r <= n; ++r)
    for (std::uint32_t k = r; k > 0; --k) row[k].add(row[k - 1]);
  detail::BigUint limit = detail::BigUint::pow2(n - alpha_log2);
  detail::BigUint suffix = detail::BigUint::zero();
  for (std::uint32_t c = window; c >= 2; --c) {
    detail::BigUint next = suffix;
    next.add(row[c - 1]);
    if (next.cmp(limit) > 0) return c + 1;
    suffix = next;
  }
  return 2;
}

// Adaptive proportion test over fixed non-overlapping windows: count copies
// of the window's first value; alarm when the count reaches the cutoff.
class AdaptiveProportionTest {
public:
  explicit AdaptiveProportionTest(std::uint32_t window = 512, std::uint32_t alpha_log2 = 20)
      : window_(window), cutoff_(adaptive_proportion_cutoff(window, alpha_log2)) {}

  std::uint32_t window() const { return window_; }
  std::uint32_t cutoff() const { return cutoff_; }
  bool alarmed() const { return alarmed_; }

  bool feed(bool bit) {
    if (pos_ == 0) {
      ref_ = bit;
      count_ = 1;
    } else if (bit == ref_) {
      ++count_;
    }
    bool fire = false;
    if (count_ >= cutoff_ && !alarmed_) {
      alarmed_ = true;
      fire = true;
    }
    if (++pos_ == window_) pos_ = 0;
    return fire;
  }

  void reset() {
    alarmed_ = false;
    pos_ = 0;
    count_ = 0;
  }

private:
  std::uint32_t window_, cutoff_;
  bool ref_ = false, alarmed_ = false;
  std::uint32_t pos_ = 0, count_ = 0;
};

struct HealthAlarm {
  enum class Kind { repetition, proportion };
  Kind kind;
  std::uint64_t bit_index;  // index of the raw bit that raised it
  std::uint32_t count;      // run length or window count at that moment
};

// Drives both tests over a raw bit stream and records latched alarms.
class HealthMonitor {
public:
  explicit HealthMonitor(double entropy_per_sample = 1.0, std::uint32_t window = 512)
      : rct_(entropy_per_sample), apt_(window) {}

  const RepetitionCountTest& rct() const { return rct_; }
  const AdaptiveProportionTest& apt() const { return apt_; }

  std::optional<HealthAlarm> feed(bool bit) {
    std::optional<HealthAlarm> event;
    if (rct_.feed(bit))
      event = HealthAlarm{HealthAlarm::Kind::repetition, index_, rct_.cutoff()};
    if (apt_.feed(bit) && !event)
      event = HealthAlarm{HealthAlarm::Kind::proportion, index_, apt_.cutoff()};
    if (event) alarms_.push_back(*event);
    ++index_;
    return event;
  }

  bool healthy() const { return !rct_.alarmed() && !apt_.alarmed(); }
  const std::vector<HealthAlarm>& alarms() const { return alarms_; }
  std::uint64_t bits_seen() const { return index_; }

  void reset() {
    rct_.reset();
    apt_.reset();
    alarms_.clear();
    index_ = 0;
  }

private:
  RepetitionCountTest rct_;
  AdaptiveProportionTest apt_;
  std::vector<HealthAlarm> alarms_;
  std::uint64_t index_ = 0;
};

}  // namespace coma
