#pragma once

#include <stdexcept>
#include <string>

namespace screwiga {

/// Failure classes. The numeric values double as CLI exit codes.
enum class ErrorKind : int {
  InvalidArgument = 1,
  Config = 2,
  Geometry = 3,
  Assembly = 4,
  Solver = 5,
  Io = 6,
};

class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& msg) { throw Error(kind, msg); }

inline void require(bool cond, ErrorKind kind, const std::string& msg) {
  if (!cond)
    fail(kind, msg);
}

} // namespace screwiga
