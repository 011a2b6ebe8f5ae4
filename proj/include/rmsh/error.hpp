#pragma once

#include <stdexcept>
#include <string>

namespace rmsh {

// All recoverable failures carry a stable machine-readable code alongside the
// human message. The CLI maps these to structured stderr output and a nonzero
// exit status.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}

  const std::string& code() const { return code_; }

 private:
  std::string code_;
};

// Precondition violations on operation inputs (bad ranges, shape mismatches).
inline Error invalid_argument(const std::string& message) {
  return Error("invalid_argument", message);
}

// Structured I/O failures: bad magic, truncation, dimension mismatch.
inline Error io_error(const std::string& message) {
  return Error("io_error", message);
}

inline Error config_error(const std::string& message) {
  return Error("config_error", message);
}

}  // namespace rmsh
