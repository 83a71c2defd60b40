#pragma once

#include <cstdint>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace coma {

// Dynamically sized bit string. Bit i lives in byte i/8 at position i%8
// (LSB-first within a byte); the hex form encodes those bytes in order.
// That layout is the declared bit order for every serialized TRN and key.
class BitVec {
public:
  BitVec() = default;

  explicit BitVec(std::size_t nbits) : bits_(nbits), words_((nbits + 63) / 64, 0) {}

  static BitVec from_u64(std::uint64_t value, std::size_t nbits) {
    if (nbits > 64) throw std::invalid_argument("BitVec::from_u64: nbits > 64");
    BitVec v(nbits);
    if (nbits > 0) v.words_[0] = nbits == 64 ? value : (value & ((std::uint64_t{1} << nbits) - 1));
    return v;
  }

  static BitVec from_bytes(const std::vector<std::uint8_t>& bytes, std::size_t nbits) {
    if (bytes.size() * 8 < nbits) throw std::invalid_argument("BitVec::from_bytes: too few bytes");
    BitVec v(nbits);
    for (std::size_t i = 0; i < nbits; ++i)
      if ((bytes[i / 8] >> (i % 8)) & 1) v.set(i, true);
    return v;
  }

  static BitVec from_hex(const std::string& hex, std::size_t nbits) {
    if (hex.size() % 2 != 0) throw std::invalid_argument("BitVec::from_hex: odd hex length");
    std::vector<std::uint8_t> bytes;
    bytes.reserve(hex.size() / 2);
    for (std::size_t i = 0; i < hex.size(); i += 2)
      bytes.push_back(static_cast<std::uint8_t>(nibble(hex[i]) << 4 | nibble(hex[i + 1])));
    return from_bytes(bytes, nbits);
  }

  std::size_t size() const { return bits_; }
  bool empty() const { return bits_ == 0; }

  bool get(std::size_t i) const {
    check(i);
    return (words_[i / 64] >> (i % 64)) & 1;
  }

  void set(std::size_t i, bool v) {
    check(i);
    std::uint64_t mask = std::uint64_t{1} << (i % 64);
    if (v) words_[i / 64] |= mask;
    else words_[i / 64] &= ~mask;
  }

  void flip(std::size_t i) { set(i, !get(i)); }

  BitVec& operator^=(const BitVec& o) {
    if (o.bits_ != bits_) throw std::invalid_argument("BitVec: xor size mismatch");
    for (std::size_t i = 0; i < words_.size(); ++i) words_[i] ^= o.words_[i];
    return *this;
  }

  friend BitVec operator^(BitVec a, const BitVec& b) { return a ^= b; }

  bool operator==(const BitVec& o) const { return bits_ == o.bits_ && words_ == o.words_; }
  bool operator!=(const BitVec& o) const { return !(*this == o); }

  bool any() const {
    for (auto w : words_)
      if (w) return true;
    return false;
  }

  std::size_t popcount() const {
    std::size_t c = 0;
    for (auto w : words_) c += static_cast<std::size_t>(__builtin_popcountll(w));
    return c;
  }

  // Circular left rotation: out[i] = in[(i + k) % size].
  BitVec rotl(std::size_t k) const {
    if (bits_ == 0) return *this;
    k %= bits_;
    BitVec out(bits_);
    for (std::size_t i = 0; i < bits_; ++i)
      if (get((i + k) % bits_)) out.set(i, true);
    return out;
  }

  std::uint64_t to_u64() const {
    if (bits_ > 64) throw std::invalid_argument("BitVec::to_u64: size > 64");
    return words_.empty() ? 0 : words_[0];
  }

  std::vector<std::uint8_t> to_bytes() const {
    std::vector<std::uint8_t> bytes((bits_ + 7) / 8, 0);
    for (std::size_t i = 0; i < bits_; ++i)
      if (get(i)) bytes[i / 8] |= static_cast<std::uint8_t>(1u << (i % 8));
    return bytes;
  }

  std::string to_hex() const {
    static const char* digits = "0123456789abcdef";
    std::string s;
    for (auto b : to_bytes()) {
      s += digits[b >> 4];
      s += digits[b & 0xf];
    }
    return s;
  }

private:
  static unsigned nibble(char c) {
    if (c >= '0' && c <= '9') return static_cast<unsigned>(c - '0');
    if (c >= 'a' && c <= 'f') return static_cast<unsigned>(c - 'a' + 10);
    if (c >= 'A' && c <= 'F') return static_cast<unsigned>(c - 'A' + 10);
    throw std::invalid_argument("BitVec::from_hex: bad digit");
  }

  void check(std::size_t i) const {
    if (i >= bits_) throw std::out_of_range("BitVec: index out of range");
  }

  std::size_t bits_ = 0;
  std::vector<std::uint64_t> words_;
};

}  // namespace coma
