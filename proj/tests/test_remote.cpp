// Remote activation over loopback TCP: server lifecycle, registry-backed
// sessions, per-session TRN freshness, replay refusal, and fault handling
// when the transport dies mid-handshake.
#include <catch_amalgamated.hpp>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cstring>
#include <filesystem>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "coma/channel.hpp"
#include "coma/protocol.hpp"
#include "coma/registry.hpp"
#include "coma/remote.hpp"

using namespace coma;

namespace {

DeviceRecord record_for(const TrustedState& trusted, const EnrollmentRecord& rec) {
  DeviceRecord out;
  out.device_id = rec.device_id;
  out.challenge_base = rec.challenge_base;
  out.sk = rec.sk;
  out.ok = trusted.obfuscation_key();
  return out;
}

// Minimal listener for fault-injection tests: accepts one connection and
// hands the raw fd to a caller-supplied handler on a background thread.
class OneShotListener {
public:
  explicit OneShotListener(std::function<void(int)> handler) {
    fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    REQUIRE(fd_ >= 0);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = 0;
    REQUIRE(::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) == 0);
    REQUIRE(::listen(fd_, 1) == 0);
    socklen_t len = sizeof addr;
    REQUIRE(::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len) == 0);
    port_ = ntohs(addr.sin_port);
    thread_ = std::thread([this, handler = std::move(handler)] {
      int conn = ::accept(fd_, nullptr, nullptr);
      if (conn >= 0) handler(conn);
    });
  }

  ~OneShotListener() {
    if (fd_ >= 0) {
      ::shutdown(fd_, SHUT_RDWR);
      ::close(fd_);
    }
    if (thread_.joinable()) thread_.join();
  }

  std::uint16_t port() const { return port_; }

private:
  int fd_ = -1;
  std::uint16_t port_ = 0;
  std::thread thread_;
};

}  // namespace

TEST_CASE("loopback activation over TCP") {
  ProtocolConfig cfg;
  DevicePair pair = make_device_pair(cfg, 11, 9001);
  EnrollmentRecord rec = enroll(pair.trusted, pair.device);

  Registry reg;
  reg.put(record_for(pair.trusted, rec));

  ActivationServer server(reg, cfg);
  server.start(0);
  REQUIRE(server.port() != 0);

  UnlockResult res = device_run(pair.device, "127.0.0.1", server.port());
  REQUIRE(res.success);
  REQUIRE(res.cycles_spent > 0);
  REQUIRE(pair.device.circuit().key_loaded());
  server.stop();

  auto sessions = server.sessions();
  REQUIRE(sessions.size() == 1);
  REQUIRE(sessions[0].device_id == 11);
  REQUIRE(sessions[0].success);
  REQUIRE_FALSE(sessions[0].trn_hex.empty());
  REQUIRE(sessions[0].error.empty());
  REQUIRE(sessions[0].cycles > 0);

  auto after = reg.find(11);
  REQUIRE(after.has_value());
  REQUIRE(after->activation_count == 1);
  REQUIRE_FALSE(after->last_activation.empty());
}

TEST_CASE("unknown device id is refused") {
  ProtocolConfig cfg;
  DevicePair pair = make_device_pair(cfg, 42, 9002);
  EnrollmentRecord rec = enroll(pair.trusted, pair.device);

  Registry reg;  // registry has never heard of device 42

  ActivationServer server(reg, cfg);
  server.start(0);

  REQUIRE_THROWS_AS(device_run(pair.device, "127.0.0.1", server.port()), AuthFailure);
  REQUIRE_FALSE(pair.device.circuit().key_loaded());
  server.stop();

  auto sessions = server.sessions();
  REQUIRE(sessions.size() == 1);
  REQUIRE_FALSE(sessions[0].success);
  REQUIRE_FALSE(sessions[0].error.empty());
  REQUIRE(reg.size() == 0);

  // An enrolled but differently-keyed record must not help either: register
  // the id with the wrong secret key and the AEAD tag check refuses it.
  DeviceRecord wrong = record_for(pair.trusted, rec);
  wrong.sk[0] ^= 0x01;
  reg.put(wrong);
  ActivationServer server2(reg, cfg);
  server2.start(0);
  pair.device.reset();
  REQUIRE_THROWS_AS(device_run(pair.device, "127.0.0.1", server2.port()), AuthFailure);
  REQUIRE_FALSE(pair.device.circuit().key_loaded());
  server2.stop();
  REQUIRE(reg.find(42)->activation_count == 0);
}

TEST_CASE("ten concurrent activations draw distinct TRNs") {
  ProtocolConfig cfg;
  Registry reg;
  std::vector<DevicePair> pairs;
  pairs.reserve(10);
  for (std::uint64_t id = 1; id <= 10; ++id) {
    pairs.push_back(make_device_pair(cfg, id, 7000 + id));
    EnrollmentRecord rec = enroll(pairs.back().trusted, pairs.back().device);
    reg.put(record_for(pairs.back().trusted, rec));
  }

  ActivationServer server(reg, cfg);
  server.start(0);

  std::atomic<int> failures{0};
  std::vector<std::thread> clients;
  clients.reserve(10);
  for (auto& p : pairs) {
    clients.emplace_back([&server, &p, &failures] {
      try {
        if (!device_run(p.device, "127.0.0.1", server.port()).success) ++failures;
      } catch (const Error&) {
        ++failures;
      }
    });
  }
  for (auto& t : clients) t.join();
  server.stop();

  REQUIRE(failures.load() == 0);
  auto sessions = server.sessions();
  REQUIRE(sessions.size() == 10);
  std::set<std::string> trns;
  for (const auto& s : sessions) {
    REQUIRE(s.success);
    REQUIRE_FALSE(s.trn_hex.empty());
    trns.insert(s.trn_hex);
  }
  REQUIRE(trns.size() == 10);  // every session negotiated a fresh TRN
  for (std::uint64_t id = 1; id <= 10; ++id) REQUIRE(reg.find(id)->activation_count == 1);
}

TEST_CASE("registry persists device records as JSON") {
  namespace fs = std::filesystem;
  fs::path path = fs::temp_directory_path() / "coma_registry_test.json";
  fs::remove(path);

  ProtocolConfig cfg;
  DevicePair pair = make_device_pair(cfg, 77, 9100);
  EnrollmentRecord rec = enroll(pair.trusted, pair.device);

  {
    Registry r1(path);
    REQUIRE(r1.size() == 0);  // missing file starts empty
    r1.put(record_for(pair.trusted, rec));
    r1.record_activation(77);
  }
  REQUIRE(fs::exists(path));

  Registry r2(path);
  REQUIRE(r2.size() == 1);
  auto back = r2.find(77);
  REQUIRE(back.has_value());
  REQUIRE(back->device_id == 77);
  REQUIRE(back->challenge_base == rec.challenge_base);
  REQUIRE(back->sk == rec.sk);
  REQUIRE(back->ok == pair.trusted.obfuscation_key());
  REQUIRE(back->activation_count == 1);
  REQUIRE_FALSE(back->last_activation.empty());

  // The persisted registry drives a real session end to end.
  ActivationServer server(r2, cfg);
  server.start(0);
  UnlockResult res = device_run(pair.device, "127.0.0.1", server.port());
  REQUIRE(res.success);
  server.stop();
  REQUIRE(r2.find(77)->activation_count == 2);

  fs::remove(path);
}

TEST_CASE("recorded handshake frames do not replay") {
  ProtocolConfig cfg;
  DevicePair pair = make_device_pair(cfg, 55, 9200);
  EnrollmentRecord rec = enroll(pair.trusted, pair.device);

  Registry reg;
  reg.put(record_for(pair.trusted, rec));

  // Capture a full activation transcript in process.
  Channel ch;
  REQUIRE(activate_pair(pair.trusted, pair.device, ch).success);
  Frame hello_frame, auth_frame;
  bool have_hello = false, have_auth = false;
  for (const TranscriptEntry& e : ch.transcript()) {
    FrameDecode d = decode_frame(e.raw.data(), e.raw.size());
    REQUIRE(d.status == FrameDecode::Status::ok);
    if (d.frame.type == FrameType::hello && !have_hello) {
      hello_frame = d.frame;
      have_hello = true;
    }
    if (d.frame.type == FrameType::auth && !have_auth) {
      auth_frame = d.frame;
      have_auth = true;
    }
  }
  REQUIRE(have_hello);
  REQUIRE(have_auth);

  ActivationServer server(reg, cfg);
  server.start(0);

  // Replay: the hello is accepted (it is public), but the recorded AUTH was
  // sealed against the old session's challenge and session id, so the fresh
  // session must refuse it.
  auto link = connect_link("127.0.0.1", server.port());
  link->send(hello_frame);
  Frame challenge = link->recv();
  REQUIRE(challenge.type == FrameType::challenge);
  link->send(auth_frame);
  Frame reply = link->recv();
  REQUIRE(reply.type == FrameType::error);
  REQUIRE_FALSE(reply.payload.empty());
  REQUIRE(reply.payload[0] == static_cast<std::uint8_t>(1));  // authentication refusal
  link->close();
  server.stop();

  REQUIRE(reg.find(55)->activation_count == 0);
  auto sessions = server.sessions();
  REQUIRE(sessions.size() == 1);
  REQUIRE_FALSE(sessions[0].success);
}

TEST_CASE("mid-handshake disconnect leaves the circuit locked") {
  ProtocolConfig cfg;
  DevicePair pair = make_device_pair(cfg, 33, 9300);
  enroll(pair.trusted, pair.device);

  OneShotListener listener([](int conn) {
    char buf[64];
    (void)::recv(conn, buf, sizeof buf, 0);  // swallow the hello ...
    ::shutdown(conn, SHUT_RDWR);             // ... then hang up abruptly
    ::close(conn);
  });

  REQUIRE_THROWS_AS(device_run(pair.device, "127.0.0.1", listener.port()), NetworkError);
  REQUIRE_FALSE(pair.device.circuit().key_loaded());
}

TEST_CASE("silent server trips the client receive timeout") {
  ProtocolConfig cfg;
  DevicePair pair = make_device_pair(cfg, 34, 9301);
  enroll(pair.trusted, pair.device);

  std::atomic<bool> release{false};
  OneShotListener listener([&release](int conn) {
    while (!release.load()) std::this_thread::sleep_for(std::chrono::milliseconds(10));
    ::close(conn);
  });

  REQUIRE_THROWS_AS(device_run(pair.device, "127.0.0.1", listener.port(), 300), TimeoutError);
  REQUIRE_FALSE(pair.device.circuit().key_loaded());
  release.store(true);
}
