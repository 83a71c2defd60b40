#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "coma/bitvec.hpp"

namespace coma {

// Deterministic random stream. The engine is std::mt19937_64 (bit-exact across
// platforms); distributions are implemented here so that a fixed seed yields
// byte-identical artifacts regardless of the standard library.
class Rng {
public:
  explicit Rng(std::uint64_t seed = 0x434f4d41u) : eng_(seed) {}

  std::uint64_t next_u64() { return eng_(); }

  bool next_bit() { return next_u64() & 1; }

  // Unbiased integer in [0, bound).
  std::uint64_t below(std::uint64_t bound) {
    if (bound == 0) return 0;
    std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound + 1) % bound;
    std::uint64_t v;
    do {
      v = next_u64();
    } while (v > limit);
    return v % bound;
  }

  double next_double() {  // [0, 1)
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Box-Muller, cached second deviate.
  double next_normal(double mean = 0.0, double stddev = 1.0) {
    if (have_spare_) {
      have_spare_ = false;
      return mean + stddev * spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * next_double() - 1.0;
      v = 2.0 * next_double() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    double m = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * m;
    have_spare_ = true;
    return mean + stddev * u * m;
  }

  BitVec next_bits(std::size_t nbits) {
    BitVec v(nbits);
    for (std::size_t i = 0; i < nbits; i += 64) {
      std::uint64_t w = next_u64();
      for (std::size_t j = 0; j < 64 && i + j < nbits; ++j)
        if ((w >> j) & 1) v.set(i + j, true);
    }
    return v;
  }

  std::vector<std::uint8_t> next_bytes(std::size_t n) {
    std::vector<std::uint8_t> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<std::uint8_t>(next_u64());
    return out;
  }

  // Independent child stream; distinct tags give distinct streams.
  Rng fork(std::uint64_t tag) {
    return Rng(next_u64() ^ (tag * 0x9e3779b97f4a7c15ull));
  }

private:
  std::mt19937_64 eng_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace coma
