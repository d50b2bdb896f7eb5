#pragma once

#include <stdexcept>
#include <string>

namespace pod {

enum class ErrorKind {
  InvalidGrid,
  Shape,
  DegenerateInput,
  Config,
  Io,
  Numeric,
  Usage,
  Generation,
};

const char* to_string(ErrorKind kind);

// Every failure raised by the library carries a kind so the CLI can map it
// onto a distinct exit code.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace pod
