#include "wmfrec/error.hpp"

namespace wmfrec {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::kParse: return "parse";
    case ErrorKind::kData: return "data";
    case ErrorKind::kConfig: return "config";
    case ErrorKind::kPath: return "path";
    case ErrorKind::kShape: return "shape";
    case ErrorKind::kIndex: return "index";
    case ErrorKind::kRank: return "rank";
    case ErrorKind::kSolver: return "solver";
    case ErrorKind::kDegenerate: return "degenerate";
    case ErrorKind::kDivergence: return "divergence";
    case ErrorKind::kCapability: return "capability";
    case ErrorKind::kHashMismatch: return "hash-mismatch";
  }
  return "unknown";
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(to_string(kind)) + " error: " + message), kind_(kind) {}

ParseError::ParseError(std::size_t line, const std::string& message)
    : Error(ErrorKind::kParse,
            line == 0 ? message : "line " + std::to_string(line) + ": " + message),
      line_(line) {}

}  // namespace wmfrec
