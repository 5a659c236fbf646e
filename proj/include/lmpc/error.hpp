#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace lmpc {

enum class ErrorKind {
  width_mismatch,
  counter_overflow,
  invalid_parameters,
  mode_unsupported,
  length_mismatch,
  share_overflow,
  receiver_overflow,
  cap_exceeded,
  insufficient_memory,
  precondition_failed,
  format,
  decode,
  injectivity,
  config,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::width_mismatch: return "width-mismatch";
    case ErrorKind::counter_overflow: return "counter-overflow";
    case ErrorKind::invalid_parameters: return "invalid-parameters";
    case ErrorKind::mode_unsupported: return "mode-unsupported";
    case ErrorKind::length_mismatch: return "length-mismatch";
    case ErrorKind::share_overflow: return "share-overflow";
    case ErrorKind::receiver_overflow: return "receiver-overflow";
    case ErrorKind::cap_exceeded: return "cap-exceeded";
    case ErrorKind::insufficient_memory: return "insufficient-memory";
    case ErrorKind::precondition_failed: return "precondition-failed";
    case ErrorKind::format: return "format";
    case ErrorKind::decode: return "decode";
    case ErrorKind::injectivity: return "injectivity-failure";
    case ErrorKind::config: return "config";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace lmpc
