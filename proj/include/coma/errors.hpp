#pragma once
// Error taxonomy shared across the library and the CLI exit-code map.

#include <stdexcept>
#include <string>

namespace coma {

// CLI process exit codes; keep in sync with the table in the README.
enum class ExitCode : int {
  ok = 0,
  config = 2,
  auth = 3,
  network = 4,
  timeout = 5,
};

struct Error : std::runtime_error {
  Error(ExitCode code, const std::string& what) : std::runtime_error(what), code(code) {}
  ExitCode code;
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& w) : Error(ExitCode::config, w) {}
};

// Frame or AEAD authentication failed
struct AuthFailure : Error {
  explicit AuthFailure(const std::string& w) : Error(ExitCode::auth, w) {}
};

// Activation completed but the self-check rejected the resulting key
struct UnlockFailure : Error {
  explicit UnlockFailure(const std::string& w) : Error(ExitCode::auth, w) {}
};

// PUF-derived key bit had an unacceptably small vote margin
struct KeyInstability : Error {
  explicit KeyInstability(const std::string& w) : Error(ExitCode::auth, w) {}
};

// One-shot PUF readout was already consumed
struct ReadoutDisabled : Error {
  explicit ReadoutDisabled(const std::string& w) : Error(ExitCode::auth, w) {}
};

struct ProtocolError : Error {
  explicit ProtocolError(const std::string& w) : Error(ExitCode::auth, w) {}
};

struct NetworkError : Error {
  explicit NetworkError(const std::string& w) : Error(ExitCode::network, w) {}
};

struct TimeoutError : Error {
  explicit TimeoutError(const std::string& w) : Error(ExitCode::timeout, w) {}
};

}  // namespace coma
