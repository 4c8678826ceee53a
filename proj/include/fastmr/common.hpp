#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace fastmr {

// Invalid configuration (bad worker count, malformed cluster file, ...).
// The CLI maps this to exit status 2.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// A collective was called with arguments violating its contract
// (wrong bucket count, root out of range). Raised before any send.
class ContractError : public std::logic_error {
 public:
  explicit ContractError(const std::string& msg) : std::logic_error(msg) {}
};

// Peer disconnect, connect timeout, collective timeout. Terminal: the
// substrate offers no recovery. The CLI maps this to exit status 3.
class TransportError : public std::runtime_error {
 public:
  explicit TransportError(const std::string& msg) : std::runtime_error(msg) {}
};

// Key or value encoding exceeds the u32 framing limit.
class OversizeError : public std::runtime_error {
 public:
  explicit OversizeError(const std::string& msg) : std::runtime_error(msg) {}
};

// Byte stream does not parse as a framed pair or message.
class MalformedFrameError : public std::runtime_error {
 public:
  explicit MalformedFrameError(const std::string& msg)
      : std::runtime_error(msg) {}
};

// A user mapper or reducer threw; the diagnostic names the offending
// source element index or key.
class JobError : public std::runtime_error {
 public:
  explicit JobError(const std::string& msg) : std::runtime_error(msg) {}
};

using WorkerId = int;

}  // namespace fastmr
