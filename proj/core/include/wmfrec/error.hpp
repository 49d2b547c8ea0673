#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace wmfrec {

/// Failure category. The command line driver maps each category to an exit
/// code, so keep the enumerator order stable.
enum class ErrorKind {
  kParse,
  kData,
  kConfig,
  kPath,
  kShape,
  kIndex,
  kRank,
  kSolver,
  kDegenerate,
  kDivergence,
  kCapability,
  kHashMismatch,
};

std::string_view to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message);

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Malformed input text. `line()` is 1-based; 0 when not tied to a line.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& message);

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace wmfrec
