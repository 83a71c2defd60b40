#pragma once
// ACORN-128 authenticated encryption. Bit-serial over a flat 293-bit state
// kept in five u64 words; bytes map to bits LSB first. 128-bit key, 128-bit
// nonce, 128-bit tag.

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace coma {

class Acorn128 {
public:
  static constexpr std::size_t key_bytes = 16;
  static constexpr std::size_t npub_bytes = 16;
  static constexpr std::size_t tag_bytes = 16;

  Acorn128(const std::uint8_t* key, const std::uint8_t* npub) {
    for (int i = 0; i < 128; ++i) update(bit_of(key, i), 1, 1);
    for (int i = 0; i < 128; ++i) update(bit_of(npub, i), 1, 1);
    for (int i = 0; i < 1536; ++i)
      update(bit_of(key, i & 127) ^ (i == 0), 1, 1);
  }

  void absorb_ad(const std::uint8_t* ad, std::size_t len) {
    for (std::size_t i = 0; i < 8 * len; ++i) update(bit_of(ad, i), 1, 1);
    pad(1);
  }

  // in-place encrypt, then call tag()
  void encrypt(std::uint8_t* data, std::size_t len) {
    for (std::size_t i = 0; i < 8 * len; ++i) {
      bool p = bit_of(data, i);
      bool ks = update(p, 1, 0);
      put_bit(data, i, p ^ ks);
    }
    pad(0);
  }

  // in-place decrypt; the recovered plaintext feeds the state
  void decrypt(std::uint8_t* data, std::size_t len) {
    for (std::size_t i = 0; i < 8 * len; ++i) {
      bool ks = pre_update(1, 0);
      bool p = bit_of(data, i) ^ ks;
      put_bit(data, i, p);
      shift(p);
    }
    pad(0);
  }

  std::array<std::uint8_t, tag_bytes> tag() {
    std::array<std::uint8_t, tag_bytes> t{};
    for (int i = 0; i < 768; ++i) {
      bool ks = update(0, 1, 1);
      if (i >= 640) put_bit(t.data(), i - 640, ks);
    }
    return t;
  }

private:
  std::array<std::uint64_t, 5> s_{};  // state bit j at word j/64, bit j%64
  bool pending_f_ = false;            // feedback staged by pre_update

  static bool bit_of(const std::uint8_t* b, std::size_t i) {
    return (b[i >> 3] >> (i & 7)) & 1;
  }
  static void put_bit(std::uint8_t* b, std::size_t i, bool v) {
    std::uint8_t m = static_cast<std::uint8_t>(1u << (i & 7));
    b[i >> 3] = static_cast<std::uint8_t>(v ? (b[i >> 3] | m) : (b[i >> 3] & ~m));
  }

  bool get(int j) const { return (s_[j >> 6] >> (j & 63)) & 1; }
  void flip(int j, bool v) {
    if (v) s_[j >> 6] ^= std::uint64_t{1} << (j & 63);
  }

  static bool maj(bool x, bool y, bool z) { return (x & y) ^ (x & z) ^ (y & z); }
  static bool ch(bool x, bool y, bool z) { return (x & y) ^ (!x & z); }

  // LFSR feed-forward, then keystream and feedback; the caller finishes the
  // step with shift(m). Split so decryption can learn ks before choosing m.
  bool pre_update(bool ca, bool cb) {
    flip(289, get(235) ^ get(230));
    flip(230, get(196) ^ get(193));
    flip(193, get(160) ^ get(154));
    flip(154, get(111) ^ get(107));
    flip(107, get(66) ^ get(61));
    flip(61, get(23) ^ get(0));
    bool ks = get(12) ^ get(154) ^ maj(get(235), get(61), get(193)) ^
              ch(get(230), get(111), get(66));
    pending_f_ = get(0) ^ !get(107) ^ maj(get(244), get(23), get(160)) ^
                 (ca & get(196)) ^ (cb & ks);
    return ks;
  }

  void shift(bool m) {
    for (int w = 0; w < 4; ++w) s_[w] = (s_[w] >> 1) | (s_[w + 1] << 63);
    s_[4] >>= 1;
    flip(292, pending_f_ ^ m);
  }

  bool update(bool m, bool ca, bool cb) {
    bool ks = pre_update(ca, cb);
    shift(m);
    return ks;
  }

  void pad(bool cb) {
    for (int i = 0; i < 256; ++i) update(i == 0, i < 128, cb);
  }
};

// One-shot helpers; ct must have room for len bytes, tag is separate.
inline std::array<std::uint8_t, 16> acorn128_encrypt(
    const std::uint8_t* key, const std::uint8_t* npub, const std::uint8_t* ad,
    std::size_t ad_len, const std::uint8_t* pt, std::size_t len, std::uint8_t* ct) {
  Acorn128 a(key, npub);
  a.absorb_ad(ad, ad_len);
  for (std::size_t i = 0; i < len; ++i) ct[i] = pt[i];
  a.encrypt(ct, len);
  return a.tag();
}

// returns false on tag mismatch; pt is filled either way and must be
// discarded by the caller on failure
inline bool acorn128_decrypt(const std::uint8_t* key, const std::uint8_t* npub,
                             const std::uint8_t* ad, std::size_t ad_len,
                             const std::uint8_t* ct, std::size_t len,
                             const std::array<std::uint8_t, 16>& tag, std::uint8_t* pt) {
  Acorn128 a(key, npub);
  a.absorb_ad(ad, ad_len);
  for (std::size_t i = 0; i < len; ++i) pt[i] = ct[i];
  a.decrypt(pt, len);
  auto t = a.tag();
  std::uint8_t diff = 0;
  for (std::size_t i = 0; i < t.size(); ++i) diff |= t[i] ^ tag[i];
  return diff == 0;
}

}  // namespace coma
