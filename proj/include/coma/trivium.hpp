#pragma once
// Trivium stream cipher (80-bit key, 80-bit IV, 288-bit state) plus the
// deterministic PRNG wrapper used for TRN generation. Bytes map to bits LSB
// first, consistent with BitVec serialization.

#include <array>
#include <cstdint>
#include <stdexcept>

#include "coma/bitvec.hpp"

namespace coma {

class Trivium {
public:
  static constexpr std::size_t key_bytes = 10;
  static constexpr std::size_t iv_bytes = 10;

  Trivium(const std::uint8_t* key, const std::uint8_t* iv) {
    a_ = load(key, 80);
    b_ = load(iv, 80);
    c_ = {0, (std::uint64_t{7} << (110 - 64 - 2))};  // s286..s288 = 1
    for (int i = 0; i < 1152; ++i) step();
  }

  bool next_bit() { return step(); }

  std::uint8_t next_byte() {
    std::uint8_t v = 0;
    for (int j = 0; j < 8; ++j) v |= static_cast<std::uint8_t>(step()) << j;
    return v;
  }

  void keystream(std::uint8_t* out, std::size_t len) {
    for (std::size_t i = 0; i < len; ++i) out[i] = next_byte();
  }

private:
  using Reg = std::array<std::uint64_t, 2>;  // LSB = newest bit (s_base+1)

  Reg a_, b_, c_;  // 93, 84, 111 bits

  static Reg load(const std::uint8_t* bytes, int nbits) {
    Reg r{0, 0};
    for (int i = 0; i < nbits; ++i)
      if ((bytes[i / 8] >> (i % 8)) & 1) r[i / 64] |= std::uint64_t{1} << (i % 64);
    return r;
  }

  // 1-based position within a register, matching s-indices offset by the
  // register base
  static bool tap(const Reg& r, int pos) {
    int i = pos - 1;
    return (r[i / 64] >> (i % 64)) & 1;
  }

  static void shift_in(Reg& r, bool bit, int len) {
    r[1] = (r[1] << 1) | (r[0] >> 63);
    r[0] = (r[0] << 1) | static_cast<std::uint64_t>(bit);
    if (len < 128) r[1] &= (std::uint64_t{1} << (len - 64)) - 1;
  }

  bool step() {
    bool t1 = tap(a_, 66) ^ tap(a_, 93);
    bool t2 = tap(b_, 69) ^ tap(b_, 84);
    bool t3 = tap(c_, 66) ^ tap(c_, 111);
    bool z = t1 ^ t2 ^ t3;
    t1 = t1 ^ (tap(a_, 91) & tap(a_, 92)) ^ tap(b_, 78);
    t2 = t2 ^ (tap(b_, 82) & tap(b_, 83)) ^ tap(c_, 87);
    t3 = t3 ^ (tap(c_, 109) & tap(c_, 110)) ^ tap(a_, 69);
    shift_in(a_, t3, 93);
    shift_in(b_, t1, 84);
    shift_in(c_, t2, 111);
    return z;
  }
};

// Deterministic PRNG with ideal-hardware cycle accounting. The throughput is
// an exact rational (bits per cycle); the cycle counter advances by
// ceil(bits * den / num) per request, so counts match the closed-form cost
// model without rounding drift.
class TriviumPrng {
public:
  // 128-bit seed: bytes 0..9 form the key, bytes 10..15 the low 48 IV bits,
  // IV bits 48..79 zero.
  explicit TriviumPrng(const std::array<std::uint8_t, 16>& seed,
                       std::uint64_t bits_per_cycle_num = 64,
                       std::uint64_t bits_per_cycle_den = 1)
      : core_(seed.data(), expand_iv(seed).data()),
        num_(bits_per_cycle_num),
        den_(bits_per_cycle_den) {
    if (num_ == 0 || den_ == 0) throw std::invalid_argument("TriviumPrng: zero rate");
  }

  BitVec next_bits(std::size_t nbits) {
    BitVec out(nbits);
    for (std::size_t i = 0; i < nbits; ++i) out.set(i, core_.next_bit());
    account(nbits);
    return out;
  }

  void next_bytes(std::uint8_t* out, std::size_t len) {
    core_.keystream(out, len);
    account(8 * len);
  }

  std::uint64_t cycles_consumed() const { return cycles_; }

  // ceil(bits / (num/den)) without leaving integer arithmetic
  static std::uint64_t cycles_for(std::uint64_t bits, std::uint64_t num, std::uint64_t den) {
    return (bits * den + num - 1) / num;
  }

private:
  static std::array<std::uint8_t, 10> expand_iv(const std::array<std::uint8_t, 16>& seed) {
    std::array<std::uint8_t, 10> iv{};
    for (int i = 0; i < 6; ++i) iv[i] = seed[10 + i];
    return iv;
  }

  void account(std::uint64_t bits) { cycles_ += cycles_for(bits, num_, den_); }

  Trivium core_;
  std::uint64_t num_, den_;
  std::uint64_t cycles_ = 0;
};

}  // namespace coma
