#pragma once

#include <stdexcept>
#include <string>

namespace btydnn {

enum class ErrorKind {
  kInvalidArgument,
  kIo,
  kParse,
  kDomain,
  kState,
};

// Single exception type for the library; the C layer maps `kind()` onto
// status codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

inline void require(bool cond, ErrorKind kind, const std::string& what) {
  if (!cond) fail(kind, what);
}

}  // namespace btydnn
