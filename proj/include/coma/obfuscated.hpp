#pragma once
// The payload being protected: a 64-bit combinational mixing network with
// XOR key gates spliced into the round boundaries. Fabrication bakes a
// secret inversion pattern (the obfuscation key) into those gates; loading
// the same pattern into the volatile key register cancels every inversion
// and restores the reference function. The register starts cleared and is
// cleared again on reset, so an unpowered or reset part computes garbage.

#include <array>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "coma/bitvec.hpp"
#include "coma/rand.hpp"

namespace coma {

inline constexpr std::size_t obf_rounds = 4;
inline constexpr std::size_t obf_key_bits = 64 * obf_rounds;

// Reference round: nonlinear AND of two rotations folded into a linear mix.
// Public function; secrecy lives entirely in the key gates.
inline std::uint64_t obf_mix(std::uint64_t x, std::size_t round) {
  auto rotl = [](std::uint64_t v, int k) { return (v << k) | (v >> (64 - k)); };
  x ^= (rotl(x, 1) & rotl(x, 8)) ^ rotl(x, 2);
  x += 0x9e3779b97f4a7c15ull * (round + 1);
  return x;
}

inline std::uint64_t obf_reference(std::uint64_t x) {
  for (std::size_t r = 0; r < obf_rounds; ++r) x = obf_mix(x, r);
  return x;
}

class ObfuscatedCircuit {
public:
  // lock = the fabricated inversion pattern, i.e. the obfuscation key.
  explicit ObfuscatedCircuit(const BitVec& lock) {
    if (lock.size() != obf_key_bits) throw std::invalid_argument("obfuscation key: bad length");
    for (std::size_t r = 0; r < obf_rounds; ++r) {
      std::uint64_t w = 0;
      for (std::size_t b = 0; b < 64; ++b)
        if (lock.get(64 * r + b)) w |= std::uint64_t{1} << b;
      lock_[r] = w;
    }
  }

  // Volatile key register.
  void load_key(const BitVec& ok) {
    if (ok.size() != obf_key_bits) throw std::invalid_argument("key register: bad length");
    for (std::size_t r = 0; r < obf_rounds; ++r) {
      std::uint64_t w = 0;
      for (std::size_t b = 0; b < 64; ++b)
        if (ok.get(64 * r + b)) w |= std::uint64_t{1} << b;
      key_[r] = w;
    }
    loaded_ = true;
  }

  void reset() {
    key_ = {};
    loaded_ = false;
  }

  bool key_loaded() const { return loaded_; }

  std::uint64_t eval(std::uint64_t x) const {
    for (std::size_t r = 0; r < obf_rounds; ++r) x = obf_mix(x, r) ^ key_[r] ^ lock_[r];
    return x;
  }

private:
  std::array<std::uint64_t, obf_rounds> lock_{};
  std::array<std::uint64_t, obf_rounds> key_{};
  bool loaded_ = false;
};

// Functional self-check burned in at enrollment: fixed inputs with expected
// reference outputs. Passing means the loaded key cancels the lock.
struct SelfCheck {
  std::array<std::uint64_t, 64> inputs{};
  std::array<std::uint64_t, 64> expected{};

  static SelfCheck generate(std::uint64_t seed) {
    SelfCheck sc;
    Rng rng(seed);
    for (std::size_t i = 0; i < 64; ++i) {
      sc.inputs[i] = rng.next_u64();
      sc.expected[i] = obf_reference(sc.inputs[i]);
    }
    return sc;
  }

  bool run(const ObfuscatedCircuit& c) const {
    for (std::size_t i = 0; i < 64; ++i)
      if (c.eval(inputs[i]) != expected[i]) return false;
    return true;
  }
};

inline BitVec random_obfuscation_key(Rng& rng) { return rng.next_bits(obf_key_bits); }

}  // namespace coma
