#pragma once
// AES-128-GCM via the OpenSSL EVP interface. 16-byte nonces are passed
// through GCM's arbitrary-IV path (GHASH derivation).

#include <openssl/evp.h>

#include <array>
#include <cstdint>
#include <memory>
#include <stdexcept>

namespace coma {

namespace detail {
struct EvpCtxFree {
  void operator()(EVP_CIPHER_CTX* p) const { EVP_CIPHER_CTX_free(p); }
};
using EvpCtx = std::unique_ptr<EVP_CIPHER_CTX, EvpCtxFree>;

inline EvpCtx gcm_ctx(const std::uint8_t* key, const std::uint8_t* npub,
                      std::size_t npub_len, bool enc) {
  EvpCtx ctx(EVP_CIPHER_CTX_new());
  if (!ctx) throw std::runtime_error("EVP_CIPHER_CTX_new failed");
  auto init = enc ? EVP_EncryptInit_ex : EVP_DecryptInit_ex;
  if (init(ctx.get(), EVP_aes_128_gcm(), nullptr, nullptr, nullptr) != 1 ||
      EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_GCM_SET_IVLEN,
                          static_cast<int>(npub_len), nullptr) != 1 ||
      init(ctx.get(), nullptr, nullptr, key, npub) != 1)
    throw std::runtime_error("AES-GCM init failed");
  return ctx;
}
}  // namespace detail

inline std::array<std::uint8_t, 16> aes128gcm_encrypt(
    const std::uint8_t* key, const std::uint8_t* npub, std::size_t npub_len,
    const std::uint8_t* ad, std::size_t ad_len, const std::uint8_t* pt,
    std::size_t len, std::uint8_t* ct) {
  auto ctx = detail::gcm_ctx(key, npub, npub_len, true);
  int outl = 0;
  if (ad_len &&
      EVP_EncryptUpdate(ctx.get(), nullptr, &outl, ad, static_cast<int>(ad_len)) != 1)
    throw std::runtime_error("AES-GCM ad failed");
  if (len &&
      EVP_EncryptUpdate(ctx.get(), ct, &outl, pt, static_cast<int>(len)) != 1)
    throw std::runtime_error("AES-GCM encrypt failed");
  if (EVP_EncryptFinal_ex(ctx.get(), ct, &outl) != 1)
    throw std::runtime_error("AES-GCM final failed");
  std::array<std::uint8_t, 16> tag{};
  if (EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_GCM_GET_TAG, 16, tag.data()) != 1)
    throw std::runtime_error("AES-GCM get tag failed");
  return tag;
}

inline bool aes128gcm_decrypt(const std::uint8_t* key, const std::uint8_t* npub,
                              std::size_t npub_len, const std::uint8_t* ad,
                              std::size_t ad_len, const std::uint8_t* ct,
                              std::size_t len, const std::array<std::uint8_t, 16>& tag,
                              std::uint8_t* pt) {
  auto ctx = detail::gcm_ctx(key, npub, npub_len, false);
  int outl = 0;
  if (ad_len &&
      EVP_DecryptUpdate(ctx.get(), nullptr, &outl, ad, static_cast<int>(ad_len)) != 1)
    throw std::runtime_error("AES-GCM ad failed");
  if (len &&
      EVP_DecryptUpdate(ctx.get(), pt, &outl, ct, static_cast<int>(len)) != 1)
    throw std::runtime_error("AES-GCM decrypt failed");
  std::array<std::uint8_t, 16> t = tag;
  if (EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_GCM_SET_TAG, 16, t.data()) != 1)
    throw std::runtime_error("AES-GCM set tag failed");
  return EVP_DecryptFinal_ex(ctx.get(), pt, &outl) == 1;
}

}  // namespace coma
