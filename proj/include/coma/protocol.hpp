#pragma once
// Trusted- and untrusted-side state machines: enrollment, activation (the
// obfuscation key delivered in network-width segments through the switching
// network), and the two data-channel modes that follow.
//
// Activation frames, in order:
//   hello       device id (clear)
//   challenge   session id, nonce, fresh challenge set (clear)
//   auth        AEAD over the PUF responses; the AD is the challenge payload
//               exactly as received, which retroactively authenticates the
//               clear part of the handshake
//   trn_update  AEAD: key length and the activation TRN
//   dpok  (xN)  AEAD: one network-transformed key segment per frame
//   ack         AEAD, empty payload
//
// The device stages every segment before touching the key register, so a
// failure anywhere leaves the circuit locked. AEAD frames bind the epoch
// (and the segment index, where there is one) as associated data, and the
// epoch field of clear frames is checked strictly; a bit flip anywhere in
// any activation frame therefore surfaces as AuthFailure on one side, which
// reports it to the peer with an error frame instead of leaving it blocked.

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstring>
#include <exception>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "coma/bitvec.hpp"
#include "coma/channel.hpp"
#include "coma/cipher.hpp"
#include "coma/costmodel.hpp"
#include "coma/errors.hpp"
#include "coma/frame.hpp"
#include "coma/obfuscated.hpp"
#include "coma/prng.hpp"
#include "coma/puf.hpp"
#include "coma/rand.hpp"
#include "coma/rng.hpp"
#include "coma/switchnet.hpp"

namespace coma {

// Raised when the trusted side's entropy source trips a health test.
struct EntropyFailure : Error {
  explicit EntropyFailure(const HealthAlarm& a)
      : Error(ExitCode::auth,
              std::string{"entropy health alarm ("} +
                  (a.kind == HealthAlarm::Kind::repetition ? "repetition" : "proportion") +
                  " at bit " + std::to_string(a.bit_index) + ")"),
        alarm(a) {}
  HealthAlarm alarm;
};

// Error-frame reason codes carried in the first payload byte.
enum class ProtoErr : std::uint8_t {
  auth = 1,
  unlock = 2,
  unknown_device = 3,
  protocol = 4,
  entropy = 5,
};

struct ProtocolConfig {
  CostParams cost = CostParams::coma2();
  NetworkKind kind = NetworkKind::log_extra_stage;
  AeadAlgo aead = AeadAlgo::acorn128;
  std::uint16_t auth_challenges = 32;

  static ProtocolConfig for_profile(const std::string& name) {
    ProtocolConfig c;
    if (name == "coma1") {
      c.cost = CostParams::coma1();
      c.aead = AeadAlgo::aes128gcm;
    } else if (name == "coma2") {
      c.cost = CostParams::coma2();
      c.aead = AeadAlgo::acorn128;
    } else {
      throw ConfigError("unknown profile: " + name);
    }
    return c;
  }

  std::uint32_t n() const { return cost.n; }

  void validate() const {
    detail::log2_checked(cost.n);  // throws unless a power of two
    if (cost.n < 4) throw ConfigError("network width must be at least 4");
    if (cost.n % 8 != 0 && cost.n != 4)
      throw ConfigError("network width must be 4 or a multiple of 8");
    if (cost.u_blocks == 0) throw ConfigError("update period must be positive");
    if (auth_challenges == 0) throw ConfigError("challenge count must be positive");
  }
};

// Cycle accounting against the closed-form cost model. One AEAD pipeline
// pass is charged per message (the framing layer may split a message over
// several records; the model treats it as one init plus a byte stream), one
// PRNG fill per TRN, and for the leaky channel one cycle count per block
// plus a stall whenever the PRNG cannot refill within an epoch. Entropy
// gathering is not charged: the raw source free-runs in the background and
// reseeds the PRNG once per activation.
class CycleLedger {
public:
  explicit CycleLedger(const CostParams& p) : p_(p) {}

  void aead_message(std::uint64_t bytes) { cycles_ += t_comm_dcc(p_, bytes); }
  void prng_fill() { cycles_ += c_prng(p_); }
  void lcc_setup() { cycles_ += lcc_init_cycles(p_); }
  void lcc_block() { cycles_ += block_cycles(p_); }

  void lcc_refresh() {
    std::uint64_t epoch = std::uint64_t{p_.u_blocks} * block_cycles(p_);
    std::uint64_t refill = p_refill_cycles(p_);
    if (refill > epoch) cycles_ += refill - epoch;
  }

  std::uint64_t cycles() const { return cycles_; }
  void reset() { cycles_ = 0; }

private:
  CostParams p_;
  std::uint64_t cycles_ = 0;
};

namespace detail {

inline Bytes epoch_ad(std::uint16_t epoch) {
  Bytes b;
  wire::put_u16(b, epoch);
  return b;
}

inline Bytes segment_ad(std::uint16_t epoch, std::uint32_t index) {
  Bytes b;
  wire::put_u16(b, epoch);
  wire::put_u32(b, index);
  return b;
}

// payload = npub counter, then ciphertext+tag
inline Bytes seal_payload(SealSession& s, const Bytes& ad, const Bytes& pt) {
  auto rec = s.seal(ad, pt);
  Bytes out;
  wire::put_u64(out, rec.counter);
  out.insert(out.end(), rec.ct.begin(), rec.ct.end());
  return out;
}

inline Bytes open_payload(OpenSession& o, const Bytes& ad, const Bytes& payload,
                          const char* what) {
  wire::Reader r(payload);
  std::uint64_t counter = 0;
  Bytes ct;
  try {
    counter = r.u64();
    ct = r.rest();
  } catch (const std::out_of_range&) {
    throw AuthFailure(std::string{what} + ": truncated payload");
  }
  auto pt = o.open(counter, ad, ct);
  if (!pt) throw AuthFailure(std::string{what} + ": authentication failed");
  return *pt;
}

inline BitVec block_from_bytes(const std::uint8_t* p, std::size_t len, std::uint32_t n) {
  Bytes padded(n / 8, 0);
  if (len) std::memcpy(padded.data(), p, len);
  return BitVec::from_bytes(padded, n);
}

inline ProtoErr error_code_for(const Error& e) {
  if (dynamic_cast<const UnlockFailure*>(&e)) return ProtoErr::unlock;
  if (dynamic_cast<const EntropyFailure*>(&e)) return ProtoErr::entropy;
  if (dynamic_cast<const AuthFailure*>(&e)) return ProtoErr::auth;
  return ProtoErr::protocol;
}

// One direction of leaky-channel state; both endpoints keep a sender copy
// and a mirror of the peer's, so the two advance in lockstep per direction
// no matter how sends interleave across directions.
struct LccDir {
  std::unique_ptr<Prng> prng;
  Trn trn;
  std::uint64_t epoch = 1;
  std::uint64_t seq = 0;
  std::uint32_t blocks = 0;  // blocks under the current full TRN
};

}  // namespace detail

inline void send_error_frame(FrameLink& link, ProtoErr code, const std::string& msg) {
  Bytes payload;
  payload.push_back(static_cast<std::uint8_t>(code));
  payload.insert(payload.end(), msg.begin(), msg.end());
  link.send(Frame{FrameType::error, 0, std::move(payload)});
}

// Shared plumbing for the two endpoint roles: session crypto, the DCC TRN
// epoch, and the per-direction LCC schedules.
class Endpoint {
public:
  Endpoint(const ProtocolConfig& cfg, bool trusted_role)
      : cfg_(cfg),
        topo_(build_network(cfg.cost.n, cfg.kind)),
        ledger_(cfg.cost),
        trusted_(trusted_role) {
    cfg_.validate();
  }

  const ProtocolConfig& config() const { return cfg_; }
  const NetworkTopology& topology() const { return topo_; }
  const CycleLedger& ledger() const { return ledger_; }
  std::uint64_t cycles() const { return ledger_.cycles(); }

  bool session_active() const { return seal_.has_value(); }
  std::uint64_t session_id() const { return session_id_; }

  // TRN of the current DCC epoch; during activation this is the TRN the key
  // segments travelled under.
  const BitVec& activation_trn() const {
    if (dcc_trn_.bits.empty()) throw ProtocolError("no activation TRN yet");
    return dcc_trn_.bits;
  }

  std::uint64_t dcc_epoch() const { return dcc_epoch_; }
  bool lcc_ready() const { return lcc_out_.prng != nullptr; }
  std::uint64_t lcc_epoch_out() const { return lcc_out_.epoch; }
  std::uint64_t lcc_seq_out() const { return lcc_out_.seq; }
  std::uint64_t lcc_seq_in() const { return lcc_in_.seq; }

  // ---- double-cipher channel: per-block switch permutation inside AEAD ----

  void dcc_send(FrameLink& link, const Bytes& msg) {
    require_session();
    const std::uint32_t bpb = cfg_.cost.n / 8;
    std::size_t nblocks = msg.empty() ? 1 : (msg.size() + bpb - 1) / bpb;
    for (std::size_t b = 0; b < nblocks; ++b) {
      if (trusted_ && dcc_blocks_ >= cfg_.cost.u_blocks) dcc_refresh(link);
      std::size_t off = b * bpb;
      std::size_t used = msg.empty() ? 0 : std::min<std::size_t>(bpb, msg.size() - off);
      BitVec x = detail::block_from_bytes(msg.data() + off, used, cfg_.cost.n);
      BitVec y = csn_forward(topo_, dcc_trn_, x);
      Bytes pt;
      pt.push_back(b + 1 == nblocks ? 1 : 0);  // flags: bit0 = last block
      pt.push_back(static_cast<std::uint8_t>(used));
      Bytes yb = y.to_bytes();
      pt.insert(pt.end(), yb.begin(), yb.end());
      Bytes payload = detail::seal_payload(*seal_, detail::epoch_ad(dcc_epoch16()), pt);
      link.send(Frame{FrameType::data_dcc, dcc_epoch16(), std::move(payload)});
      ++dcc_blocks_;
    }
    ledger_.aead_message(msg.size());
  }

  Bytes dcc_recv(FrameLink& link) {
    require_session();
    const std::uint32_t bpb = cfg_.cost.n / 8;
    Bytes out;
    for (;;) {
      Frame f = recv_mapped(link);
      if (f.type == FrameType::trn_update && !trusted_) {
        accept_trn_update(f);
        continue;
      }
      if (f.type != FrameType::data_dcc)
        throw ProtocolError(std::string{"unexpected "} + to_string(f.type) + " frame");
      if (f.epoch != dcc_epoch16()) throw ProtocolError("stale TRN epoch");
      Bytes pt = detail::open_payload(*open_, detail::epoch_ad(dcc_epoch16()), f.payload,
                                      "data block");
      if (pt.size() != 2 + bpb) throw ProtocolError("bad data block length");
      std::uint8_t flags = pt[0], used = pt[1];
      if (used > bpb) throw ProtocolError("bad block fill");
      BitVec y = BitVec::from_bytes(Bytes(pt.begin() + 2, pt.end()), cfg_.cost.n);
      Bytes xb = rcsn_backward(topo_, dcc_trn_, y).to_bytes();
      out.insert(out.end(), xb.begin(), xb.begin() + used);
      ++dcc_blocks_;  // received blocks count against the sender budget too
      if (flags & 1) {
        ledger_.aead_message(out.size());
        return out;
      }
    }
  }

  // ---- leaky channel: permutation only, PRNG-scheduled TRNs ----

  void lcc_send(FrameLink& link, const Bytes& msg) {
    require_lcc();
    const std::uint32_t bpb = cfg_.cost.n / 8;
    std::size_t nblocks = msg.empty() ? 1 : (msg.size() + bpb - 1) / bpb;
    for (std::size_t b = 0; b < nblocks; ++b) {
      advance_lcc(lcc_out_);
      std::size_t off = b * bpb;
      std::size_t used = msg.empty() ? 0 : std::min<std::size_t>(bpb, msg.size() - off);
      BitVec x = detail::block_from_bytes(msg.data() + off, used, cfg_.cost.n);
      BitVec y = csn_forward(topo_, lcc_out_.trn, x);
      Bytes payload;
      wire::put_u32(payload, static_cast<std::uint32_t>(lcc_out_.seq));
      payload.push_back(b + 1 == nblocks ? 1 : 0);
      payload.push_back(static_cast<std::uint8_t>(used));
      Bytes yb = y.to_bytes();
      payload.insert(payload.end(), yb.begin(), yb.end());
      link.send(Frame{FrameType::data_lcc, static_cast<std::uint16_t>(lcc_out_.epoch),
                      std::move(payload)});
      ++lcc_out_.seq;
      ++lcc_out_.blocks;
      ledger_.lcc_block();
    }
  }

  Bytes lcc_recv(FrameLink& link) {
    require_lcc();
    const std::uint32_t bpb = cfg_.cost.n / 8;
    Bytes out;
    for (;;) {
      Frame f = recv_mapped(link);
      if (f.type != FrameType::data_lcc)
        throw ProtocolError(std::string{"unexpected "} + to_string(f.type) + " frame");
      advance_lcc(lcc_in_);
      if (f.epoch != static_cast<std::uint16_t>(lcc_in_.epoch))
        throw ProtocolError("leaky channel desynchronized: epoch mismatch");
      wire::Reader r(f.payload);
      std::uint32_t seq;
      std::uint8_t flags, used;
      Bytes yb;
      try {
        seq = r.u32();
        flags = r.u8();
        used = r.u8();
        yb = r.take(bpb);
        if (!r.done()) throw std::out_of_range("trailing bytes");
      } catch (const std::out_of_range&) {
        throw ProtocolError("bad leaky-channel block");
      }
      if (seq != static_cast<std::uint32_t>(lcc_in_.seq))
        throw ProtocolError("leaky channel desynchronized: block counter mismatch");
      if (used > bpb) throw ProtocolError("bad block fill");
      BitVec y = BitVec::from_bytes(yb, cfg_.cost.n);
      Bytes xb = rcsn_backward(topo_, lcc_in_.trn, y).to_bytes();
      out.insert(out.end(), xb.begin(), xb.begin() + used);
      ++lcc_in_.seq;
      ++lcc_in_.blocks;
      ledger_.lcc_block();
      if (flags & 1) return out;
    }
  }

protected:
  std::uint16_t dcc_epoch16() const { return static_cast<std::uint16_t>(dcc_epoch_); }

  void require_session() const {
    if (!seal_ || dcc_trn_.bits.empty()) throw ProtocolError("no active session");
  }

  void require_lcc() const {
    require_session();
    if (!lcc_ready()) throw ProtocolError("leaky channel not initialized");
  }

  void engage_session(const Key128& sk, std::uint64_t session_id) {
    session_id_ = session_id;
    std::uint64_t mine = trusted_ ? session_id : session_id ^ 1;
    seal_.emplace(cfg_.aead, sk, mine);
    open_.emplace(cfg_.aead, sk, mine ^ 1);
  }

  void clear_session() {
    seal_.reset();
    open_.reset();
    session_id_ = 0;
    dcc_trn_ = Trn{};
    dcc_epoch_ = 0;
    dcc_blocks_ = 0;
    lcc_out_ = detail::LccDir{};
    lcc_in_ = detail::LccDir{};
    peer_errored_ = false;
  }

  void set_dcc_trn(Trn trn, std::uint64_t epoch) {
    dcc_trn_ = std::move(trn);
    dcc_epoch_ = epoch;
    dcc_blocks_ = 0;
  }

  // Trusted sender only: draw a fresh TRN and push it inside an AEAD frame.
  void dcc_refresh(FrameLink& link) {
    Trn trn(topo_, session_prng_->next_bits(topo_.config_bits()));
    ledger_.prng_fill();
    std::uint64_t next = dcc_epoch_ + 1;
    Bytes pt = trn.bits.to_bytes();
    Bytes payload = detail::seal_payload(
        *seal_, detail::epoch_ad(static_cast<std::uint16_t>(next)), pt);
    link.send(Frame{FrameType::trn_update, static_cast<std::uint16_t>(next),
                    std::move(payload)});
    ledger_.aead_message(pt.size());
    set_dcc_trn(std::move(trn), next);
  }

  void accept_trn_update(const Frame& f) {
    std::uint64_t next = dcc_epoch_ + 1;
    if (f.epoch != static_cast<std::uint16_t>(next))
      throw ProtocolError("unexpected TRN epoch");
    Bytes pt = detail::open_payload(
        *open_, detail::epoch_ad(static_cast<std::uint16_t>(next)), f.payload, "TRN update");
    std::size_t nbytes = (topo_.config_bits() + 7) / 8;
    if (pt.size() != nbytes) throw ProtocolError("bad TRN length");
    set_dcc_trn(Trn(topo_, BitVec::from_bytes(pt, topo_.config_bits())), next);
    ledger_.aead_message(pt.size());
  }

  // Two independent per-direction schedules from one seed, so concurrent
  // traffic in both directions cannot reorder PRNG draws.
  void engage_lcc(const std::array<std::uint8_t, 16>& seed) {
    PrngAlgo algo = prng_for_profile(cfg_.cost.profile);
    auto dir_prng = [&](std::uint8_t dir) {
      std::array<std::uint8_t, 16> s = seed;
      s[15] ^= dir;
      return make_prng(algo, s);
    };
    std::uint8_t out_dir = trusted_ ? 0 : 1;
    lcc_out_ = detail::LccDir{};
    lcc_in_ = detail::LccDir{};
    lcc_out_.prng = dir_prng(out_dir);
    lcc_in_.prng = dir_prng(out_dir ^ 1);
    lcc_out_.trn = Trn(topo_, lcc_out_.prng->next_bits(topo_.config_bits()));
    lcc_in_.trn = Trn(topo_, lcc_in_.prng->next_bits(topo_.config_bits()));
  }

  // Per-block TRN schedule: rotate by one bit each block, replace with a
  // fresh PRNG fill every u_blocks. Sender and mirror run this identically.
  void advance_lcc(detail::LccDir& d) {
    if (d.blocks >= cfg_.cost.u_blocks) {
      d.trn = Trn(topo_, d.prng->next_bits(topo_.config_bits()));
      ++d.epoch;
      d.blocks = 0;
      ledger_.lcc_refresh();
    } else if (d.blocks > 0) {
      d.trn = shift_trn(d.trn, 1);
    }
  }

  // Receive one frame, turning peer error reports into the matching local
  // exception and network conditions into NetworkError (from the link).
  Frame recv_mapped(FrameLink& link) {
    Frame f = link.recv();
    if (f.type == FrameType::error) throw_peer_error(f);
    return f;
  }

  [[noreturn]] void throw_peer_error(const Frame& f) {
    peer_errored_ = true;
    ProtoErr code = ProtoErr::protocol;
    std::string msg = "peer reported an error";
    if (!f.payload.empty()) {
      code = static_cast<ProtoErr>(f.payload[0]);
      if (f.payload.size() > 1)
        msg = std::string(f.payload.begin() + 1, f.payload.end());
    }
    switch (code) {
      case ProtoErr::unlock: throw UnlockFailure("peer: " + msg);
      case ProtoErr::auth:
      case ProtoErr::unknown_device: throw AuthFailure("peer: " + msg);
      default: throw ProtocolError("peer: " + msg);
    }
  }

  Frame recv_checked(FrameLink& link, FrameType want, std::uint16_t epoch) {
    Frame f = recv_mapped(link);
    if (f.type != want)
      throw AuthFailure(std::string{"expected "} + to_string(want) + " frame, got " +
                        to_string(f.type));
    if (f.epoch != epoch) throw AuthFailure("unexpected frame epoch");
    return f;
  }

  // Report a local failure to the peer unless the peer reported it first;
  // never let the report itself mask the original error.
  void report_failure(FrameLink& link, const Error& e) {
    if (peer_errored_) return;
    try {
      send_error_frame(link, detail::error_code_for(e), e.what());
    } catch (...) {
      try {
        link.close();
      } catch (...) {
      }
    }
  }

  ProtocolConfig cfg_;
  NetworkTopology topo_;
  CycleLedger ledger_;
  bool trusted_;

  std::optional<SealSession> seal_;
  std::optional<OpenSession> open_;
  std::uint64_t session_id_ = 0;
  std::unique_ptr<Prng> session_prng_;  // trusted side only

  Trn dcc_trn_;
  std::uint64_t dcc_epoch_ = 0;
  std::uint32_t dcc_blocks_ = 0;

  detail::LccDir lcc_out_, lcc_in_;
  bool peer_errored_ = false;
};

struct UnlockResult {
  bool success = false;
  std::uint64_t cycles_spent = 0;
};

struct DeviceOptions {
  bool pseudo_puf = false;
  double noise_sigma = 0.25;
  EntropySource::Mode trng_mode = EntropySource::Mode::ideal;
  double trng_bias = 0.5;
};

// The chip in the field: PUF, hardwired challenge base, helper counters from
// enrollment, the locked circuit, and volatile session state only.
class UntrustedDevice : public Endpoint {
public:
  UntrustedDevice(const ProtocolConfig& cfg, std::uint64_t device_id,
                  std::uint64_t challenge_base, const BitVec& lock,
                  std::uint64_t selfcheck_seed, std::unique_ptr<PufOracle> puf)
      : Endpoint(cfg, /*trusted_role=*/false),
        device_id_(device_id),
        challenge_base_(challenge_base),
        puf_(std::move(puf)),
        readout_(*puf_),
        circuit_(lock),
        selfcheck_(SelfCheck::generate(selfcheck_seed)) {
    if (obf_key_bits % cfg.cost.n != 0)
      throw ConfigError("key length not a multiple of the network width");
  }

  std::uint64_t device_id() const { return device_id_; }
  std::uint64_t challenge_base() const { return challenge_base_; }
  PufOracle& puf() { return *puf_; }
  PufReadout& readout() { return readout_; }
  const std::vector<std::uint32_t>& helper_counters() const { return counters_; }
  bool enrolled() const { return counters_.size() == 128; }
  const ObfuscatedCircuit& circuit() const { return circuit_; }
  const SelfCheck& selfcheck() const { return selfcheck_; }
  const std::vector<BitVec>& last_dal() const { return last_dal_; }

  void store_helper_counters(std::vector<std::uint32_t> counters) {
    counters_ = std::move(counters);
  }

  // The device can always recompute SK from its PUF; nothing is stored.
  Key128 derive_secret_key() {
    if (!enrolled()) throw ProtocolError("device not enrolled");
    return rederive_key(*puf_, challenge_base_, counters_);
  }

  // Power cycle: volatile key material and session state vanish.
  void reset() {
    circuit_.reset();
    clear_session();
    last_dal_.clear();
  }

  void activate(FrameLink& link) {
    reset();
    link.send(Frame{FrameType::hello, 0, device_id_payload()});
    try {
      run_activation(link);
    } catch (const Error& e) {
      report_failure(link, e);
      throw;
    }
  }

  // Replay a recorded DAL (the decrypted DPOK segments) under the current
  // activation TRN. Returns true only if the resulting key passes the
  // self-check; on failure the circuit is left locked.
  bool apply_dal(const std::vector<BitVec>& dal) {
    require_session();
    std::size_t segments = obf_key_bits / cfg_.cost.n;
    if (dal.size() != segments) throw ConfigError("wrong DAL segment count");
    circuit_.load_key(assemble_key(dal, dcc_trn_));
    if (selfcheck_.run(circuit_)) return true;
    circuit_.reset();
    return false;
  }

  // Accept a leaky-channel seed frame (the counterpart of lcc_init).
  void lcc_accept(FrameLink& link) {
    require_session();
    Frame f = recv_checked(link, FrameType::seed, 0);
    Bytes pt = detail::open_payload(*open_, detail::epoch_ad(0), f.payload, "seed");
    if (pt.size() != 16) throw AuthFailure("bad seed length");
    std::array<std::uint8_t, 16> seed{};
    std::copy(pt.begin(), pt.end(), seed.begin());
    engage_lcc(seed);
    ledger_.lcc_setup();
  }

private:
  Bytes device_id_payload() const {
    Bytes b;
    wire::put_u64(b, device_id_);
    return b;
  }

  void run_activation(FrameLink& link) {
    Frame ch = recv_checked(link, FrameType::challenge, 0);
    wire::Reader r(ch.payload);
    std::uint64_t sid;
    Bytes nonce;
    std::uint16_t count;
    std::vector<std::uint64_t> challenges;
    try {
      sid = r.u64();
      nonce = r.take(16);
      count = r.u16();
      for (std::uint16_t i = 0; i < count; ++i) challenges.push_back(r.u64());
      if (!r.done()) throw std::out_of_range("trailing bytes");
    } catch (const std::out_of_range&) {
      throw AuthFailure("malformed challenge frame");
    }
    if (count == 0) throw AuthFailure("empty challenge set");
    if (!enrolled()) throw ProtocolError("device not enrolled");

    Key128 sk = derive_secret_key();
    engage_session(sk, sid);

    BitVec responses(count);
    for (std::uint16_t i = 0; i < count; ++i) {
      int ones = 0;
      for (int v = 0; v < 15; ++v) ones += puf_->eval(challenges[i]);
      responses.set(i, 2 * ones > 15);
    }
    // AD = the challenge payload as received: any flip in the clear part of
    // the handshake breaks the tag on one side or the other.
    Bytes auth = detail::seal_payload(*seal_, ch.payload, responses.to_bytes());
    link.send(Frame{FrameType::auth, 0, std::move(auth)});
    ledger_.aead_message(responses.to_bytes().size());

    Frame tu = recv_checked(link, FrameType::trn_update, 1);
    Bytes pt = detail::open_payload(*open_, detail::epoch_ad(1), tu.payload, "TRN transfer");
    std::size_t trn_bytes = (topo_.config_bits() + 7) / 8;
    wire::Reader tr(pt);
    std::uint32_t ok_bits;
    Bytes tb;
    try {
      ok_bits = tr.u32();
      tb = tr.take(trn_bytes);
      if (!tr.done()) throw std::out_of_range("trailing bytes");
    } catch (const std::out_of_range&) {
      throw AuthFailure("malformed TRN transfer");
    }
    if (ok_bits != obf_key_bits) throw ProtocolError("unexpected key length");
    Trn trn(topo_, BitVec::from_bytes(tb, topo_.config_bits()));
    ledger_.aead_message(pt.size());

    // Stage every segment; nothing reaches the key register until all of
    // them have authenticated.
    std::size_t segments = obf_key_bits / cfg_.cost.n;
    std::vector<BitVec> dal;
    for (std::size_t i = 0; i < segments; ++i) {
      Frame df = recv_checked(link, FrameType::dpok, 1);
      Bytes seg = detail::open_payload(
          *open_, detail::segment_ad(1, static_cast<std::uint32_t>(i)), df.payload,
          "key segment");
      if (seg.size() != cfg_.cost.n / 8) throw ProtocolError("bad key segment length");
      dal.push_back(BitVec::from_bytes(seg, cfg_.cost.n));
      ledger_.aead_message(seg.size());
    }

    set_dcc_trn(trn, 1);
    circuit_.load_key(assemble_key(dal, dcc_trn_));
    if (!selfcheck_.run(circuit_)) {
      circuit_.reset();
      throw UnlockFailure("circuit self-check failed");
    }
    last_dal_ = std::move(dal);

    Bytes ack = detail::seal_payload(*seal_, detail::epoch_ad(1), Bytes{});
    link.send(Frame{FrameType::ack, 1, std::move(ack)});
    ledger_.aead_message(0);
  }

  BitVec assemble_key(const std::vector<BitVec>& dal, const Trn& trn) const {
    BitVec ok(obf_key_bits);
    for (std::size_t i = 0; i < dal.size(); ++i) {
      BitVec pok = rcsn_backward(topo_, trn, dal[i]);
      for (std::uint32_t b = 0; b < cfg_.cost.n; ++b)
        ok.set(i * cfg_.cost.n + b, pok.get(b));
    }
    return ok;
  }

  std::uint64_t device_id_;
  std::uint64_t challenge_base_;
  std::unique_ptr<PufOracle> puf_;
  PufReadout readout_;
  ObfuscatedCircuit circuit_;
  SelfCheck selfcheck_;
  std::vector<std::uint32_t> counters_;
  std::vector<BitVec> last_dal_;
};

// The activation side: secure store (obfuscation key, PUF-derived secret
// key), entropy source with health tests, and the per-session PRNG.
class TrustedState : public Endpoint {
public:
  TrustedState(const ProtocolConfig& cfg, std::uint64_t device_id, BitVec ok,
               EntropySource trng)
      : Endpoint(cfg, /*trusted_role=*/true),
        device_id_(device_id),
        ok_(std::move(ok)),
        trng_(std::move(trng)) {
    if (ok_.size() != obf_key_bits) throw ConfigError("bad obfuscation key length");
  }

  std::uint64_t device_id() const { return device_id_; }
  const BitVec& obfuscation_key() const { return ok_; }
  const HealthMonitor& health() const { return monitor_; }
  std::uint64_t activations() const { return activations_; }
  bool enrolled() const { return sk_.has_value(); }

  EnrollmentAuthority& authority() { return authority_; }

  void set_secret_key(const Key128& sk) { sk_ = sk; }
  const Key128& secret_key() const {
    if (!sk_) throw ProtocolError("device not enrolled");
    return *sk_;
  }

  // Full trusted half, starting from the hello frame.
  UnlockResult activate(FrameLink& link) {
    Frame hello = recv_mapped(link);
    if (hello.type != FrameType::hello || hello.epoch != 0) {
      AuthFailure e("expected hello frame");
      report_failure(link, e);
      throw e;
    }
    wire::Reader r(hello.payload);
    std::uint64_t id = 0;
    try {
      id = r.u64();
    } catch (const std::out_of_range&) {
      AuthFailure e("malformed hello frame");
      report_failure(link, e);
      throw e;
    }
    if (id != device_id_) {
      AuthFailure e("unknown device id");
      report_failure(link, e);
      throw e;
    }
    return activate_session(link);
  }

  // Trusted half after the hello frame has been consumed (the remote server
  // reads hello itself to pick the device record).
  UnlockResult activate_session(FrameLink& link) {
    clear_session();
    ledger_.reset();
    try {
      run_activation(link);
    } catch (const Error& e) {
      report_failure(link, e);
      throw;
    }
    ++activations_;
    return UnlockResult{true, ledger_.cycles()};
  }

  // Switch the session to the leaky channel: AEAD-synchronize a fresh PRNG
  // seed, then both sides schedule TRNs locally.
  void lcc_init(FrameLink& link) {
    require_session();
    std::uint64_t refill = p_refill_cycles(cfg_.cost);
    if (cfg_.cost.u_blocks >= cfg_.cost.n)
      throw ConfigError("update period must stay below the network width");
    if (refill > cfg_.cost.u_blocks)
      throw ConfigError("PRNG refill exceeds the update period");
    std::array<std::uint8_t, 16> seed = healthy_bits<16>();
    Bytes pt(seed.begin(), seed.end());
    Bytes payload = detail::seal_payload(*seal_, detail::epoch_ad(0), pt);
    link.send(Frame{FrameType::seed, 0, std::move(payload)});
    engage_lcc(seed);
    ledger_.lcc_setup();
  }

private:
  void run_activation(FrameLink& link) {
    if (!sk_) throw ProtocolError("device not enrolled");

    // One reseed per activation: raw entropy bits stream through the health
    // tests, then everything session-scoped comes from the PRNG.
    std::array<std::uint8_t, 16> seed = healthy_bits<16>();
    session_prng_ = make_prng(prng_for_profile(cfg_.cost.profile), seed);

    std::uint64_t sid = prng_u64();
    Bytes challenge_payload;
    wire::put_u64(challenge_payload, sid);
    Bytes nonce(16);
    session_prng_->next_bytes(nonce.data(), nonce.size());
    challenge_payload.insert(challenge_payload.end(), nonce.begin(), nonce.end());
    wire::put_u16(challenge_payload, cfg_.auth_challenges);
    for (std::uint16_t i = 0; i < cfg_.auth_challenges; ++i)
      wire::put_u64(challenge_payload, prng_u64());
    link.send(Frame{FrameType::challenge, 0, challenge_payload});

    engage_session(*sk_, sid);

    // The tag is the authentication: it proves possession of the PUF-derived
    // key (we keep no challenge-response table to compare values against).
    Frame auth = recv_checked(link, FrameType::auth, 0);
    Bytes responses =
        detail::open_payload(*open_, challenge_payload, auth.payload, "authentication");
    if (responses.size() != (cfg_.auth_challenges + 7u) / 8)
      throw AuthFailure("bad response length");
    ledger_.aead_message(responses.size());

    Trn trn(topo_, session_prng_->next_bits(topo_.config_bits()));
    ledger_.prng_fill();
    Bytes pt;
    wire::put_u32(pt, obf_key_bits);
    Bytes tb = trn.bits.to_bytes();
    pt.insert(pt.end(), tb.begin(), tb.end());
    Bytes payload = detail::seal_payload(*seal_, detail::epoch_ad(1), pt);
    link.send(Frame{FrameType::trn_update, 1, std::move(payload)});
    ledger_.aead_message(pt.size());

    std::size_t segments = obf_key_bits / cfg_.cost.n;
    for (std::size_t i = 0; i < segments; ++i) {
      BitVec pok(cfg_.cost.n);
      for (std::uint32_t b = 0; b < cfg_.cost.n; ++b)
        pok.set(b, ok_.get(i * cfg_.cost.n + b));
      BitVec dpok = csn_forward(topo_, trn, pok);
      Bytes seg = dpok.to_bytes();
      Bytes sp = detail::seal_payload(
          *seal_, detail::segment_ad(1, static_cast<std::uint32_t>(i)), seg);
      link.send(Frame{FrameType::dpok, 1, std::move(sp)});
      ledger_.aead_message(seg.size());
    }

    Frame ack = recv_checked(link, FrameType::ack, 1);
    Bytes empty = detail::open_payload(*open_, detail::epoch_ad(1), ack.payload, "ack");
    if (!empty.empty()) throw AuthFailure("bad ack payload");
    ledger_.aead_message(0);

    set_dcc_trn(std::move(trn), 1);
  }

  std::uint64_t prng_u64() {
    std::uint8_t b[8];
    session_prng_->next_bytes(b, 8);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
    return v;
  }

  template <std::size_t N>
  std::array<std::uint8_t, N> healthy_bits() {
    std::array<std::uint8_t, N> out{};
    for (std::size_t i = 0; i < N * 8; ++i) {
      bool bit = trng_.next_bit();
      if (auto alarm = monitor_.feed(bit)) throw EntropyFailure(*alarm);
      if (bit) out[i / 8] |= static_cast<std::uint8_t>(1u << (i % 8));
    }
    return out;
  }

  std::uint64_t device_id_;
  BitVec ok_;
  EntropySource trng_;
  HealthMonitor monitor_;
  EnrollmentAuthority authority_;
  std::optional<Key128> sk_;
  std::uint64_t activations_ = 0;
};

struct EnrollmentRecord {
  std::uint64_t device_id = 0;
  std::uint64_t challenge_base = 0;
  Key128 sk{};
};

// One-time secure readout: the PUF-derived key crosses to the trusted side
// sealed under the authority's public key; the device keeps only the public
// helper counters. A second attempt trips ReadoutDisabled.
inline EnrollmentRecord enroll(TrustedState& trusted, UntrustedDevice& device) {
  auto enrollment =
      device.readout().seal_key(device.challenge_base(), trusted.authority().public_key());
  device.store_helper_counters(enrollment.counters);
  Key128 sk = trusted.authority().unseal(enrollment.sealed);
  trusted.set_secret_key(sk);
  return EnrollmentRecord{device.device_id(), device.challenge_base(), sk};
}

struct DevicePair {
  TrustedState trusted;
  UntrustedDevice device;
};

// Fabricate a chip pair: the lock pattern is shared (designed into the chip,
// recorded by the trusted side), everything else is per-device randomness.
inline DevicePair make_device_pair(const ProtocolConfig& cfg, std::uint64_t device_id,
                                   std::uint64_t seed, const DeviceOptions& opt = {}) {
  Rng fab(seed ^ device_id * 0x9e3779b97f4a7c15ull);
  BitVec ok = random_obfuscation_key(fab);
  std::uint64_t challenge_base = fab.next_u64();
  std::uint64_t selfcheck_seed = fab.next_u64();
  std::uint64_t puf_seed = fab.next_u64();
  std::uint64_t trng_seed = fab.next_u64();
  std::unique_ptr<PufOracle> puf;
  if (opt.pseudo_puf)
    puf = std::make_unique<PseudoPuf>(puf_seed);
  else
    puf = std::make_unique<ArbiterPuf>(puf_seed, opt.noise_sigma);
  return DevicePair{
      TrustedState(cfg, device_id, ok,
                   EntropySource(trng_seed, opt.trng_mode, opt.trng_bias)),
      UntrustedDevice(cfg, device_id, challenge_base, ok, selfcheck_seed,
                      std::move(puf))};
}

// Drive both halves of an activation over an in-process channel, untrusted
// on a worker thread. If both sides fail, prefer the more specific cause
// over a transport error.
inline UnlockResult activate_pair(TrustedState& trusted, UntrustedDevice& device,
                                  Channel& channel) {
  std::exception_ptr device_ex;
  std::thread worker([&] {
    try {
      device.activate(channel.end_b());
    } catch (...) {
      device_ex = std::current_exception();
    }
  });
  UnlockResult result{};
  std::exception_ptr trusted_ex;
  try {
    result = trusted.activate(channel.end_a());
  } catch (...) {
    trusted_ex = std::current_exception();
    channel.close();  // unblock the device half if it is still waiting
  }
  worker.join();
  if (trusted_ex) {
    if (device_ex) {
      try {
        std::rethrow_exception(trusted_ex);
      } catch (const NetworkError&) {
        std::rethrow_exception(device_ex);
      } catch (...) {
        throw;
      }
    }
    std::rethrow_exception(trusted_ex);
  }
  if (device_ex) std::rethrow_exception(device_ex);
  return result;
}

}  // namespace coma
