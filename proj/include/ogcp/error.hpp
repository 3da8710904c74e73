#pragma once

#include <stdexcept>
#include <string>

namespace ogcp {

/// Broad failure classes; the CLI maps these onto exit codes.
enum class ErrorKind {
  Index,
  Shape,
  Domain,
  Parse,
  Sampling,
  Precondition,
  Divergence,
  LinearSolve,
  Generation,
  Contract,
  Io,
};

const char* to_string(ErrorKind kind);

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

}  // namespace ogcp
