#include "ogcp/error.hpp"

namespace ogcp {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Index: return "index";
    case ErrorKind::Shape: return "shape";
    case ErrorKind::Domain: return "domain";
    case ErrorKind::Parse: return "parse";
    case ErrorKind::Sampling: return "sampling";
    case ErrorKind::Precondition: return "precondition";
    case ErrorKind::Divergence: return "divergence";
    case ErrorKind::LinearSolve: return "linear-solve";
    case ErrorKind::Generation: return "generation";
    case ErrorKind::Contract: return "contract";
    case ErrorKind::Io: return "io";
  }
  return "unknown";
}

}  // namespace ogcp
