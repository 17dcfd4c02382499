#pragma once

#include <stdexcept>
#include <string>

namespace gramstab {

enum class ErrorKind {
  kDimension,
  kDomain,
  kIllConditioned,
  kNotObservable,
  kKink,
  kDivergence,
  kDegenerateFit,
  kGeneration,
  kConfig,
};

const char* to_string(ErrorKind kind);

/// Every failure raised by the library carries a kind so that callers (the CLI
/// in particular) can map it onto a stable exit code.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what),
        kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kDimension: return "dimension error";
    case ErrorKind::kDomain: return "domain error";
    case ErrorKind::kIllConditioned: return "ill-conditioned";
    case ErrorKind::kNotObservable: return "not observable";
    case ErrorKind::kKink: return "kink error";
    case ErrorKind::kDivergence: return "divergence";
    case ErrorKind::kDegenerateFit: return "degenerate fit";
    case ErrorKind::kGeneration: return "generation error";
    case ErrorKind::kConfig: return "config error";
  }
  return "error";
}

}  // namespace gramstab
