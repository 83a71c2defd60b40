#pragma once
// Remote activation over TCP: a FrameLink on a socket, the activation
// server with its device registry, and the device-side client. The wire
// carries exactly the frames the in-process channel carries, so transcripts
// from either transport replay against the other.

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <sys/time.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <cstdint>
#include <cstring>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "coma/channel.hpp"
#include "coma/errors.hpp"
#include "coma/frame.hpp"
#include "coma/protocol.hpp"
#include "coma/registry.hpp"
#include "coma/rng.hpp"

namespace coma {

// Frame transport on a connected socket. Receive distinguishes the three
// failure shapes callers care about: peer gone (NetworkError), no data
// within the timeout (TimeoutError), and bytes that are not a valid frame
// (AuthFailure, matching the in-process channel's view of corruption).
class SocketLink final : public FrameLink {
public:
  explicit SocketLink(int fd, int timeout_ms = 0) : fd_(fd) {
    if (timeout_ms > 0) {
      timeval tv{};
      tv.tv_sec = timeout_ms / 1000;
      tv.tv_usec = (timeout_ms % 1000) * 1000;
      ::setsockopt(fd_, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof tv);
    }
  }

  SocketLink(const SocketLink&) = delete;
  SocketLink& operator=(const SocketLink&) = delete;
  ~SocketLink() override { close(); }

  void send(const Frame& f) override {
    if (fd_ < 0) throw NetworkError("socket closed");
    Bytes raw = encode_frame(f);
    std::size_t off = 0;
    while (off < raw.size()) {
      ssize_t n = ::send(fd_, raw.data() + off, raw.size() - off, MSG_NOSIGNAL);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw NetworkError(std::string{"send: "} + std::strerror(errno));
      }
      off += static_cast<std::size_t>(n);
    }
  }

  Frame recv() override {
    for (;;) {
      if (auto f = reader_.next()) return std::move(*f);
      if (reader_.corrupted()) throw AuthFailure("malformed frame");
      if (fd_ < 0) throw NetworkError("socket closed");
      std::uint8_t buf[4096];
      ssize_t n = ::recv(fd_, buf, sizeof buf, 0);
      if (n == 0) throw NetworkError("connection closed by peer");
      if (n < 0) {
        if (errno == EINTR) continue;
        if (errno == EAGAIN || errno == EWOULDBLOCK)
          throw TimeoutError("receive timed out");
        throw NetworkError(std::string{"recv: "} + std::strerror(errno));
      }
      reader_.feed(buf, static_cast<std::size_t>(n));
    }
  }

  void close() override {
    if (fd_ >= 0) {
      ::shutdown(fd_, SHUT_RDWR);
      ::close(fd_);
      fd_ = -1;
    }
  }

private:
  int fd_;
  FrameReader reader_;
};

inline std::unique_ptr<SocketLink> connect_link(const std::string& host,
                                                std::uint16_t port,
                                                int timeout_ms = 10000) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  int rc = ::getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints, &res);
  if (rc != 0) throw NetworkError(std::string{"resolve "} + host + ": " + gai_strerror(rc));
  int fd = -1;
  for (addrinfo* ai = res; ai; ai = ai->ai_next) {
    fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
    if (fd < 0) continue;
    if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
    ::close(fd);
    fd = -1;
  }
  ::freeaddrinfo(res);
  if (fd < 0) throw NetworkError("cannot connect to " + host + ":" + std::to_string(port));
  return std::make_unique<SocketLink>(fd, timeout_ms);
}

struct SessionLog {
  std::uint64_t device_id = 0;
  bool success = false;
  std::string trn_hex;  // activation TRN, for freshness checks across sessions
  std::uint64_t cycles = 0;
  std::string error;
};

// Accepts connections, looks the device up in the registry, and runs the
// trusted half of the activation. One thread per session; sessions share
// nothing but the registry.
class ActivationServer {
public:
  ActivationServer(Registry& registry, const ProtocolConfig& cfg,
                   std::uint64_t trng_seed = 0x72636f6d61ull, int session_timeout_ms = 10000)
      : registry_(registry), cfg_(cfg), trng_seed_(trng_seed),
        session_timeout_ms_(session_timeout_ms) {}

  ~ActivationServer() { stop(); }

  // Bind to 127.0.0.1; port 0 picks an ephemeral port (see port()).
  void start(std::uint16_t port = 0) {
    if (listen_fd_ >= 0) throw ConfigError("server already started");
    listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (listen_fd_ < 0) throw NetworkError(std::string{"socket: "} + std::strerror(errno));
    int one = 1;
    ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = htons(port);
    if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0 ||
        ::listen(listen_fd_, 16) < 0) {
      int err = errno;
      ::close(listen_fd_);
      listen_fd_ = -1;
      throw NetworkError(std::string{"bind/listen: "} + std::strerror(err));
    }
    socklen_t len = sizeof addr;
    ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.sin_port);
    accept_thread_ = std::thread([this] { accept_loop(); });
  }

  std::uint16_t port() const { return port_; }

  void stop() {
    int fd = listen_fd_.exchange(-1);
    if (fd >= 0) {
      ::shutdown(fd, SHUT_RDWR);
      ::close(fd);
    }
    if (accept_thread_.joinable()) accept_thread_.join();
    std::vector<std::thread> workers;
    {
      std::lock_guard lk(mu_);
      workers.swap(workers_);
    }
    for (auto& t : workers) t.join();
  }

  std::vector<SessionLog> sessions() const {
    std::lock_guard lk(mu_);
    return log_;
  }

private:
  void accept_loop() {
    for (;;) {
      int fd = ::accept(listen_fd_.load(), nullptr, nullptr);
      if (fd < 0) {
        if (errno == EINTR) continue;
        return;  // listener closed by stop()
      }
      std::lock_guard lk(mu_);
      workers_.emplace_back([this, fd] { handle(fd); });
    }
  }

  void handle(int fd) {
    SocketLink link(fd, session_timeout_ms_);
    SessionLog entry;
    try {
      Frame hello = link.recv();
      if (hello.type != FrameType::hello || hello.epoch != 0) {
        send_error_frame(link, ProtoErr::auth, "expected hello frame");
        entry.error = "expected hello frame";
        push_log(entry);
        return;
      }
      wire::Reader r(hello.payload);
      std::uint64_t id;
      try {
        id = r.u64();
      } catch (const std::out_of_range&) {
        send_error_frame(link, ProtoErr::auth, "malformed hello frame");
        entry.error = "malformed hello frame";
        push_log(entry);
        return;
      }
      entry.device_id = id;
      auto rec = registry_.find(id);
      if (!rec) {
        send_error_frame(link, ProtoErr::unknown_device, "unknown device id");
        entry.error = "unknown device id";
        push_log(entry);
        return;
      }
      TrustedState trusted(cfg_, id, rec->ok, EntropySource(session_seed()));
      trusted.set_secret_key(rec->sk);
      UnlockResult result = trusted.activate_session(link);
      registry_.record_activation(id);
      entry.success = true;
      entry.trn_hex = trusted.activation_trn().to_hex();
      entry.cycles = result.cycles_spent;
    } catch (const Error& e) {
      // activate_session already reported the failure to the peer
      entry.error = e.what();
    } catch (const std::exception& e) {
      entry.error = e.what();
    }
    push_log(entry);
  }

  std::uint64_t session_seed() {
    std::uint64_t k = seq_.fetch_add(1);
    return trng_seed_ ^ (k + 1) * 0x9e3779b97f4a7c15ull;
  }

  void push_log(const SessionLog& entry) {
    std::lock_guard lk(mu_);
    log_.push_back(entry);
  }

  Registry& registry_;
  ProtocolConfig cfg_;
  std::uint64_t trng_seed_;
  int session_timeout_ms_;
  std::atomic<int> listen_fd_{-1};
  std::atomic<std::uint64_t> seq_{0};
  std::uint16_t port_ = 0;
  std::thread accept_thread_;
  mutable std::mutex mu_;
  std::vector<std::thread> workers_;
  std::vector<SessionLog> log_;
};

// Device-side client: connect, run the untrusted half, report the device's
// own cycle count. Network failures surface as NetworkError/TimeoutError,
// protocol failures keep their protocol types.
inline UnlockResult device_run(UntrustedDevice& device, const std::string& host,
                               std::uint16_t port, int timeout_ms = 10000) {
  auto link = connect_link(host, port, timeout_ms);
  device.activate(*link);
  return UnlockResult{true, device.cycles()};
}

}  // namespace coma
