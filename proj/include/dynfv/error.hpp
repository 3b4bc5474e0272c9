#pragma once

#include <stdexcept>
#include <string>

namespace dynfv {

// Error categories. The numeric values line up with the CLI exit codes
// (2 usage, 3 io, 4 format) and the C API status codes.
enum class ErrorCode {
  internal = 1,
  usage = 2,
  io = 3,
  format = 4,
  invalid_argument = 5,
  insufficient_data = 6,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void raise(ErrorCode code, const std::string& msg) {
  throw Error(code, msg);
}

}  // namespace dynfv
