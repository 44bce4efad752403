#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace fvmf {

enum class ErrorKind {
  Domain,
  DimensionMismatch,
  DegenerateMean,
  ZeroOutput,
  NonFiniteLoss,
  EmptyCategory,
  UnknownIdentity,
  Format,
  Io,
  Usage,
};

constexpr std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Domain: return "domain";
    case ErrorKind::DimensionMismatch: return "dimension-mismatch";
    case ErrorKind::DegenerateMean: return "degenerate-mean";
    case ErrorKind::ZeroOutput: return "zero-output";
    case ErrorKind::NonFiniteLoss: return "non-finite-loss";
    case ErrorKind::EmptyCategory: return "empty-category";
    case ErrorKind::UnknownIdentity: return "unknown-identity";
    case ErrorKind::Format: return "format";
    case ErrorKind::Io: return "io";
    case ErrorKind::Usage: return "usage";
  }
  return "unknown";
}

/// Every failure raised by the library carries a category so the CLI can
/// report `error[<category>]: <message>`.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool cond, ErrorKind kind, const char* what) {
  if (!cond) fail(kind, what);
}

}  // namespace fvmf
