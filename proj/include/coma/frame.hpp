#pragma once
// Wire framing shared by the in-process channel and the TCP transport, so a
// transcript captured on one replays on the other. Layout, all fixed fields
// big-endian:
//
//   [ length: u32 ] [ type: u8 ] [ epoch: u16 ] [ payload ... ]
//
// length counts everything after itself (type + epoch + payload), the whole
// frame is capped at 64 KiB, and unknown type tags are rejected at decode.

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

namespace coma {

using Bytes = std::vector<std::uint8_t>;

enum class FrameType : std::uint8_t {
  hello = 1,
  challenge = 2,
  auth = 3,
  trn_update = 4,
  dpok = 5,
  seed = 6,
  data_dcc = 7,
  data_lcc = 8,
  ack = 9,
  error = 255,
};

inline bool frame_type_valid(std::uint8_t t) {
  return (t >= 1 && t <= 9) || t == 255;
}

inline const char* to_string(FrameType t) {
  switch (t) {
    case FrameType::hello: return "hello";
    case FrameType::challenge: return "challenge";
    case FrameType::auth: return "auth";
    case FrameType::trn_update: return "trn_update";
    case FrameType::dpok: return "dpok";
    case FrameType::seed: return "seed";
    case FrameType::data_dcc: return "data_dcc";
    case FrameType::data_lcc: return "data_lcc";
    case FrameType::ack: return "ack";
    case FrameType::error: return "error";
  }
  return "?";
}

struct Frame {
  FrameType type = FrameType::error;
  std::uint16_t epoch = 0;
  Bytes payload;

  bool operator==(const Frame& o) const {
    return type == o.type && epoch == o.epoch && payload == o.payload;
  }
};

inline constexpr std::size_t max_frame_bytes = 64 * 1024;      // on the wire
inline constexpr std::size_t max_frame_payload = max_frame_bytes - 7;

inline Bytes encode_frame(const Frame& f) {
  if (f.payload.size() > max_frame_payload) throw std::invalid_argument("frame too large");
  std::uint32_t len = static_cast<std::uint32_t>(f.payload.size() + 3);
  Bytes out;
  out.reserve(4 + len);
  out.push_back(static_cast<std::uint8_t>(len >> 24));
  out.push_back(static_cast<std::uint8_t>(len >> 16));
  out.push_back(static_cast<std::uint8_t>(len >> 8));
  out.push_back(static_cast<std::uint8_t>(len));
  out.push_back(static_cast<std::uint8_t>(f.type));
  out.push_back(static_cast<std::uint8_t>(f.epoch >> 8));
  out.push_back(static_cast<std::uint8_t>(f.epoch));
  out.insert(out.end(), f.payload.begin(), f.payload.end());
  return out;
}

struct FrameDecode {
  enum class Status { ok, need_more, bad };
  Status status = Status::need_more;
  Frame frame;
  std::size_t consumed = 0;  // bytes to drop from the stream (ok only)
};

inline FrameDecode decode_frame(const std::uint8_t* data, std::size_t len) {
  FrameDecode r;
  if (len < 4) return r;
  std::uint32_t flen = (std::uint32_t{data[0]} << 24) | (std::uint32_t{data[1]} << 16) |
                       (std::uint32_t{data[2]} << 8) | std::uint32_t{data[3]};
  if (flen < 3 || std::size_t{flen} + 4 > max_frame_bytes) {
    r.status = FrameDecode::Status::bad;
    return r;
  }
  if (len < 4 + std::size_t{flen}) {
    if (len > 4 && !frame_type_valid(data[4])) r.status = FrameDecode::Status::bad;
    return r;
  }
  if (!frame_type_valid(data[4])) {
    r.status = FrameDecode::Status::bad;
    return r;
  }
  r.status = FrameDecode::Status::ok;
  r.frame.type = static_cast<FrameType>(data[4]);
  r.frame.epoch = static_cast<std::uint16_t>((std::uint16_t{data[5]} << 8) | data[6]);
  r.frame.payload.assign(data + 7, data + 4 + flen);
  r.consumed = 4 + flen;
  return r;
}

// Incremental decoder over a byte stream. Once a malformed frame is seen the
// stream is poisoned: framing cannot be trusted past that point.
class FrameReader {
public:
  void feed(const std::uint8_t* data, std::size_t len) {
    buf_.insert(buf_.end(), data, data + len);
  }
  void feed(const Bytes& b) { feed(b.data(), b.size()); }

  bool corrupted() const { return corrupted_; }
  std::size_t buffered() const { return buf_.size(); }

  std::optional<Frame> next() {
    if (corrupted_) return std::nullopt;
    FrameDecode d = decode_frame(buf_.data(), buf_.size());
    switch (d.status) {
      case FrameDecode::Status::need_more: return std::nullopt;
      case FrameDecode::Status::bad:
        corrupted_ = true;
        return std::nullopt;
      case FrameDecode::Status::ok:
        buf_.erase(buf_.begin(), buf_.begin() + static_cast<std::ptrdiff_t>(d.consumed));
        return d.frame;
    }
    return std::nullopt;
  }

private:
  Bytes buf_;
  bool corrupted_ = false;
};

// Little helpers for packing fixed-width integers into payloads.
namespace wire {

inline void put_u16(Bytes& b, std::uint16_t v) {
  b.push_back(static_cast<std::uint8_t>(v >> 8));
  b.push_back(static_cast<std::uint8_t>(v));
}

inline void put_u32(Bytes& b, std::uint32_t v) {
  put_u16(b, static_cast<std::uint16_t>(v >> 16));
  put_u16(b, static_cast<std::uint16_t>(v));
}

inline void put_u64(Bytes& b, std::uint64_t v) {
  put_u32(b, static_cast<std::uint32_t>(v >> 32));
  put_u32(b, static_cast<std::uint32_t>(v));
}

// Cursor-style reads; throws keep malformed payloads from running off the end.
struct Reader {
  const Bytes& b;
  std::size_t at = 0;

  explicit Reader(const Bytes& bytes) : b(bytes) {}

  void need(std::size_t k) const {
    if (at + k > b.size()) throw std::out_of_range("payload truncated");
  }
  std::uint8_t u8() {
    need(1);
    return b[at++];
  }
  std::uint16_t u16() {
    need(2);
    std::uint16_t v = static_cast<std::uint16_t>((std::uint16_t{b[at]} << 8) | b[at + 1]);
    at += 2;
    return v;
  }
  std::uint32_t u32() {
    std::uint32_t hi = u16();
    return (hi << 16) | u16();
  }
  std::uint64_t u64() {
    std::uint64_t hi = u32();
    return (hi << 32) | u32();
  }
  Bytes take(std::size_t k) {
    need(k);
    Bytes out(b.begin() + static_cast<std::ptrdiff_t>(at),
              b.begin() + static_cast<std::ptrdiff_t>(at + k));
    at += k;
    return out;
  }
  Bytes rest() { return take(b.size() - at); }
  bool done() const { return at == b.size(); }
};

}  // namespace wire

}  // namespace coma
