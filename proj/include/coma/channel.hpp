#pragma once
// In-process frame transport: two blocking byte queues carrying the same
// encoded frames as the TCP transport, so transcripts recorded here replay
// there and vice versa. A channel can flip one bit of a chosen frame in
// flight for tamper experiments, and every frame is logged (direction plus
// raw bytes) as JSON lines.

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "coma/errors.hpp"
#include "coma/frame.hpp"

#include "json.hpp"

namespace coma {

// One endpoint's view of a frame transport. recv blocks; a closed link
// surfaces as NetworkError so callers handle in-process and TCP the same way.
class FrameLink {
public:
  virtual ~FrameLink() = default;
  virtual void send(const Frame& f) = 0;
  virtual Frame recv() = 0;
  virtual void close() = 0;
};

struct TranscriptEntry {
  std::uint64_t seq = 0;
  std::string dir;  // "a>b" or "b>a"
  Bytes raw;
};

inline std::string transcript_to_jsonl(const std::vector<TranscriptEntry>& entries) {
  std::ostringstream os;
  for (const TranscriptEntry& e : entries) {
    nlohmann::json j;
    j["seq"] = e.seq;
    j["dir"] = e.dir;
    std::string hex;
    hex.reserve(e.raw.size() * 2);
    static const char* digits = "0123456789abcdef";
    for (std::uint8_t b : e.raw) {
      hex.push_back(digits[b >> 4]);
      hex.push_back(digits[b & 15]);
    }
    j["raw"] = hex;
    os << j.dump() << '\n';
  }
  return os.str();
}

inline std::vector<TranscriptEntry> transcript_from_jsonl(const std::string& text) {
  std::vector<TranscriptEntry> out;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string{"transcript: "} + e.what());
    }
    TranscriptEntry e;
    e.seq = j.value("seq", std::uint64_t{0});
    e.dir = j.value("dir", std::string{});
    std::string hex = j.value("raw", std::string{});
    if (hex.size() % 2) throw ConfigError("transcript: odd hex length");
    auto nib = [](char c) -> int {
      if (c >= '0' && c <= '9') return c - '0';
      if (c >= 'a' && c <= 'f') return c - 'a' + 10;
      if (c >= 'A' && c <= 'F') return c - 'A' + 10;
      throw ConfigError("transcript: bad hex digit");
    };
    for (std::size_t i = 0; i < hex.size(); i += 2)
      e.raw.push_back(static_cast<std::uint8_t>((nib(hex[i]) << 4) | nib(hex[i + 1])));
    out.push_back(std::move(e));
  }
  return out;
}

// Flip one bit of the k-th frame (counting both directions, zero-based).
struct TamperSpec {
  std::uint64_t frame_index = 0;
  std::uint64_t bit = 0;
};

class Channel {
public:
  Channel() : a_end_(*this, /*is_a=*/true), b_end_(*this, /*is_a=*/false) {}

  FrameLink& end_a() { return a_end_; }
  FrameLink& end_b() { return b_end_; }

  void set_tamper(const TamperSpec& spec) {
    std::lock_guard lk(mu_);
    tamper_ = spec;
  }

  std::vector<TranscriptEntry> transcript() const {
    std::lock_guard lk(mu_);
    return transcript_;
  }

  std::string transcript_jsonl() const { return transcript_to_jsonl(transcript()); }

  void close() {
    std::lock_guard lk(mu_);
    closed_ = true;
    cv_.notify_all();
  }

private:
  struct End final : FrameLink {
    Channel& ch;
    bool is_a;
    End(Channel& c, bool a) : ch(c), is_a(a) {}
    void send(const Frame& f) override { ch.push(is_a, f); }
    Frame recv() override { return ch.pop(is_a); }
    void close() override { ch.close(); }
  };

  void push(bool from_a, const Frame& f) {
    Bytes raw = encode_frame(f);
    std::lock_guard lk(mu_);
    if (closed_) throw NetworkError("channel closed");
    if (tamper_ && tamper_->frame_index == seq_) {
      std::uint64_t bit = tamper_->bit % (raw.size() * 8);
      raw[bit / 8] ^= static_cast<std::uint8_t>(1u << (bit % 8));
    }
    transcript_.push_back({seq_, from_a ? "a>b" : "b>a", raw});
    ++seq_;
    (from_a ? to_b_ : to_a_).push_back(raw);
    cv_.notify_all();
  }

  Frame pop(bool at_a) {
    std::unique_lock lk(mu_);
    auto& q = at_a ? to_a_ : to_b_;
    cv_.wait(lk, [&] { return !q.empty() || closed_; });
    if (q.empty()) throw NetworkError("channel closed");
    Bytes raw = std::move(q.front());
    q.pop_front();
    lk.unlock();
    FrameDecode d = decode_frame(raw.data(), raw.size());
    if (d.status != FrameDecode::Status::ok || d.consumed != raw.size())
      throw AuthFailure("malformed frame");
    return std::move(d.frame);
  }

  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::deque<Bytes> to_a_, to_b_;
  std::vector<TranscriptEntry> transcript_;
  std::optional<TamperSpec> tamper_;
  std::uint64_t seq_ = 0;
  bool closed_ = false;
  End a_end_;
  End b_end_;
};

}  // namespace coma
