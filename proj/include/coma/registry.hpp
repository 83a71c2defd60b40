#pragma once
// Device registry backing the activation server: id → enrolled challenge,
// secret key, obfuscation key, activation count, last-activation timestamp.
// Persisted as one JSON file, rewritten atomically (temp file + rename);
// reads are concurrent, writes serialized.

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "coma/bitvec.hpp"
#include "coma/cipher.hpp"
#include "coma/errors.hpp"

#include "json.hpp"

namespace coma {

struct DeviceRecord {
  std::uint64_t device_id = 0;
  std::uint64_t challenge_base = 0;
  Key128 sk{};
  BitVec ok;  // obfuscation key bits
  std::uint64_t activation_count = 0;
  std::string last_activation;  // ISO 8601 UTC; empty until first activation
};

namespace detail {

inline std::string key_to_hex(const Key128& k) {
  static const char* digits = "0123456789abcdef";
  std::string s;
  for (std::uint8_t b : k) {
    s += digits[b >> 4];
    s += digits[b & 15];
  }
  return s;
}

inline Key128 key_from_hex(const std::string& hex) {
  if (hex.size() != 32) throw ConfigError("registry: bad key length");
  auto nib = [](char c) -> unsigned {
    if (c >= '0' && c <= '9') return static_cast<unsigned>(c - '0');
    if (c >= 'a' && c <= 'f') return static_cast<unsigned>(c - 'a' + 10);
    if (c >= 'A' && c <= 'F') return static_cast<unsigned>(c - 'A' + 10);
    throw ConfigError("registry: bad hex digit");
  };
  Key128 k{};
  for (std::size_t i = 0; i < 16; ++i)
    k[i] = static_cast<std::uint8_t>((nib(hex[2 * i]) << 4) | nib(hex[2 * i + 1]));
  return k;
}

inline std::string iso_utc_now() {
  std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace detail

class Registry {
public:
  // In-memory only; nothing is persisted.
  Registry() = default;

  // Backed by a JSON file; loads it if present, creates it on first write.
  explicit Registry(std::filesystem::path path) : path_(std::move(path)) { load(); }

  const std::filesystem::path& path() const { return path_; }

  void put(const DeviceRecord& rec) {
    std::lock_guard lk(mu_);
    records_[rec.device_id] = rec;
    save_locked();
  }

  std::optional<DeviceRecord> find(std::uint64_t device_id) const {
    std::lock_guard lk(mu_);
    auto it = records_.find(device_id);
    if (it == records_.end()) return std::nullopt;
    return it->second;
  }

  // Bump the counter and stamp the time; unknown ids are a caller bug.
  void record_activation(std::uint64_t device_id) {
    std::lock_guard lk(mu_);
    auto it = records_.find(device_id);
    if (it == records_.end()) throw ConfigError("registry: unknown device");
    ++it->second.activation_count;
    it->second.last_activation = detail::iso_utc_now();
    save_locked();
  }

  std::vector<std::uint64_t> ids() const {
    std::lock_guard lk(mu_);
    std::vector<std::uint64_t> out;
    out.reserve(records_.size());
    for (const auto& [id, rec] : records_) out.push_back(id);
    return out;
  }

  std::size_t size() const {
    std::lock_guard lk(mu_);
    return records_.size();
  }

private:
  void load() {
    if (path_.empty() || !std::filesystem::exists(path_)) return;
    std::ifstream in(path_);
    if (!in) throw ConfigError("registry: cannot read " + path_.string());
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string{"registry: "} + e.what());
    }
    for (const auto& d : j.value("devices", nlohmann::json::array())) {
      DeviceRecord rec;
      rec.device_id = d.at("id").get<std::uint64_t>();
      rec.challenge_base = d.at("challenge").get<std::uint64_t>();
      rec.sk = detail::key_from_hex(d.at("sk").get<std::string>());
      std::string ok_hex = d.at("ok").get<std::string>();
      rec.ok = BitVec::from_hex(ok_hex, ok_hex.size() * 4);
      rec.activation_count = d.value("activations", std::uint64_t{0});
      rec.last_activation = d.value("last_activation", std::string{});
      records_[rec.device_id] = rec;
    }
  }

  void save_locked() {
    if (path_.empty()) return;
    nlohmann::json devices = nlohmann::json::array();
    for (const auto& [id, rec] : records_) {
      nlohmann::json d;
      d["id"] = rec.device_id;
      d["challenge"] = rec.challenge_base;
      d["sk"] = detail::key_to_hex(rec.sk);
      d["ok"] = rec.ok.to_hex();
      d["activations"] = rec.activation_count;
      d["last_activation"] = rec.last_activation;
      devices.push_back(std::move(d));
    }
    nlohmann::json j;
    j["devices"] = std::move(devices);

    std::filesystem::path tmp = path_;
    tmp += ".tmp";
    {
      std::ofstream out(tmp, std::ios::trunc);
      if (!out) throw ConfigError("registry: cannot write " + tmp.string());
      out << j.dump(2) << '\n';
    }
    std::filesystem::rename(tmp, path_);
  }

  mutable std::mutex mu_;
  std::map<std::uint64_t, DeviceRecord> records_;
  std::filesystem::path path_;
};

}  // namespace coma
