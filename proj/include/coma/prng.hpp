#pragma once
// Seedable keystream generators behind one interface, so the link layer can
// pair the lightweight profile with Trivium and the NIST-compliant profile
// with AES-CTR without caring which is which. Both sides of a link seed the
// same generator and stay bit-synchronized by construction.

#include <array>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>

#include <openssl/evp.h>

#include "coma/bitvec.hpp"
#include "coma/trivium.hpp"

namespace coma {

class Prng {
public:
  virtual ~Prng() = default;
  virtual BitVec next_bits(std::size_t nbits) = 0;
  virtual void next_bytes(std::uint8_t* out, std::size_t len) = 0;
};

class TriviumStream final : public Prng {
public:
  explicit TriviumStream(const std::array<std::uint8_t, 16>& seed) : prng_(seed) {}

  BitVec next_bits(std::size_t nbits) override { return prng_.next_bits(nbits); }
  void next_bytes(std::uint8_t* out, std::size_t len) override { prng_.next_bytes(out, len); }

private:
  TriviumPrng prng_;
};

// AES-128 in counter mode over an all-zero stream; seed is the key, zero IV.
class AesCtrStream final : public Prng {
public:
  explicit AesCtrStream(const std::array<std::uint8_t, 16>& seed)
      : ctx_(EVP_CIPHER_CTX_new(), EVP_CIPHER_CTX_free) {
    if (!ctx_) throw std::runtime_error("EVP_CIPHER_CTX_new");
    std::array<std::uint8_t, 16> iv{};
    if (EVP_EncryptInit_ex(ctx_.get(), EVP_aes_128_ctr(), nullptr, seed.data(), iv.data()) != 1)
      throw std::runtime_error("AES-CTR init failed");
  }

  BitVec next_bits(std::size_t nbits) override {
    std::vector<std::uint8_t> bytes((nbits + 7) / 8, 0);
    next_bytes(bytes.data(), bytes.size());
    return BitVec::from_bytes(bytes, nbits);
  }

  void next_bytes(std::uint8_t* out, std::size_t len) override {
    std::vector<std::uint8_t> zeros(len, 0);
    int outl = 0;
    if (EVP_EncryptUpdate(ctx_.get(), out, &outl, zeros.data(), static_cast<int>(len)) != 1 ||
        outl != static_cast<int>(len))
      throw std::runtime_error("AES-CTR update failed");
  }

private:
  std::unique_ptr<EVP_CIPHER_CTX, decltype(&EVP_CIPHER_CTX_free)> ctx_;
};

enum class PrngAlgo { trivium, aes_ctr };

inline PrngAlgo prng_for_profile(const std::string& profile) {
  return profile == "coma1" ? PrngAlgo::aes_ctr : PrngAlgo::trivium;
}

inline std::unique_ptr<Prng> make_prng(PrngAlgo algo, const std::array<std::uint8_t, 16>& seed) {
  if (algo == PrngAlgo::aes_ctr) return std::make_unique<AesCtrStream>(seed);
  return std::make_unique<TriviumStream>(seed);
}

}  // namespace coma
