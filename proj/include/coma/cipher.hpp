#pragma once
// AEAD selection and the per-session nonce discipline. A session nonce is
// session_id || counter, both 64-bit little-endian; counters only move
// forward, so a nonce can never be reused within a session and replayed
// records are rejected by the receive side.

#include <algorithm>
#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "coma/acorn.hpp"
#include "coma/aes_gcm.hpp"

namespace coma {

enum class AeadAlgo { acorn128, aes128gcm };

inline const char* to_string(AeadAlgo a) {
  return a == AeadAlgo::acorn128 ? "acorn128" : "aes128gcm";
}

inline AeadAlgo aead_from_string(const std::string& s) {
  if (s == "acorn128") return AeadAlgo::acorn128;
  if (s == "aes128gcm") return AeadAlgo::aes128gcm;
  throw std::invalid_argument("unknown aead: " + s);
}

using Bytes = std::vector<std::uint8_t>;
using Npub = std::array<std::uint8_t, 16>;
using Key128 = std::array<std::uint8_t, 16>;

inline Npub make_npub(std::uint64_t session_id, std::uint64_t counter) {
  Npub n{};
  for (int i = 0; i < 8; ++i) {
    n[i] = static_cast<std::uint8_t>(session_id >> (8 * i));
    n[8 + i] = static_cast<std::uint8_t>(counter >> (8 * i));
  }
  return n;
}

class Aead {
public:
  Aead(AeadAlgo algo, const Key128& key) : algo_(algo), key_(key) {}

  AeadAlgo algo() const { return algo_; }

  // returns ciphertext || 16-byte tag
  Bytes encrypt(const Npub& npub, const Bytes& ad, const Bytes& pt) const {
    Bytes out(pt.size() + 16);
    std::array<std::uint8_t, 16> tag;
    if (algo_ == AeadAlgo::acorn128) {
      tag = acorn128_encrypt(key_.data(), npub.data(), ad.data(), ad.size(),
                             pt.data(), pt.size(), out.data());
    } else {
      tag = aes128gcm_encrypt(key_.data(), npub.data(), npub.size(), ad.data(),
                              ad.size(), pt.data(), pt.size(), out.data());
    }
    std::copy(tag.begin(), tag.end(), out.begin() + pt.size());
    return out;
  }

  std::optional<Bytes> decrypt(const Npub& npub, const Bytes& ad, const Bytes& ct) const {
    if (ct.size() < 16) return std::nullopt;
    std::size_t len = ct.size() - 16;
    std::array<std::uint8_t, 16> tag;
    std::copy(ct.begin() + len, ct.end(), tag.begin());
    Bytes pt(len);
    bool ok;
    if (algo_ == AeadAlgo::acorn128) {
      ok = acorn128_decrypt(key_.data(), npub.data(), ad.data(), ad.size(),
                            ct.data(), len, tag, pt.data());
    } else {
      ok = aes128gcm_decrypt(key_.data(), npub.data(), npub.size(), ad.data(),
                             ad.size(), ct.data(), len, tag, pt.data());
    }
    if (!ok) return std::nullopt;
    return pt;
  }

private:
  AeadAlgo algo_;
  Key128 key_;
};

// Sender half: stamps each record with the next counter value.
class SealSession {
public:
  SealSession(AeadAlgo algo, const Key128& key, std::uint64_t session_id)
      : aead_(algo, key), session_id_(session_id) {}

  struct Record {
    std::uint64_t counter;
    Bytes ct;  // ciphertext || tag
  };

  Record seal(const Bytes& ad, const Bytes& pt) {
    std::uint64_t c = counter_++;
    return {c, aead_.encrypt(make_npub(session_id_, c), ad, pt)};
  }

  std::uint64_t session_id() const { return session_id_; }

private:
  Aead aead_;
  std::uint64_t session_id_;
  std::uint64_t counter_ = 0;
};

// Receiver half: rejects tag failures and any counter at or below the last
// accepted one, so captured records cannot be replayed.
class OpenSession {
public:
  OpenSession(AeadAlgo algo, const Key128& key, std::uint64_t session_id)
      : aead_(algo, key), session_id_(session_id) {}

  std::optional<Bytes> open(std::uint64_t counter, const Bytes& ad, const Bytes& ct) {
    if (seen_any_ && counter <= last_) return std::nullopt;
    auto pt = aead_.decrypt(make_npub(session_id_, counter), ad, ct);
    if (!pt) return std::nullopt;
    last_ = counter;
    seen_any_ = true;
    return pt;
  }

private:
  Aead aead_;
  std::uint64_t session_id_;
  std::uint64_t last_ = 0;
  bool seen_any_ = false;
};

}  // namespace coma
