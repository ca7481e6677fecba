#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace ccas {

/// Failure categories, mapped 1:1 onto CLI exit codes.
enum class ErrorKind {
  Config,    // bad flags, missing credential, unusable configuration
  Upstream,  // transport or service failure after retries
  Data,      // malformed files, invalid inputs, parse failures
  Eval       // evaluation cannot produce a defined metric
};

class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, std::string message)
      : std::runtime_error(std::move(message)), kind_(kind) {}

  Error(ErrorKind kind, std::string message, std::string detail)
      : std::runtime_error(std::move(message)), kind_(kind), detail_(std::move(detail)) {}

  ErrorKind kind() const noexcept { return kind_; }

  /// Extra payload, e.g. the raw LLM reply a parse failed on. Empty if unused.
  const std::string& detail() const noexcept { return detail_; }

private:
  ErrorKind kind_;
  std::string detail_;
};

/// Exit code contract: 0 ok, 2 config, 3 upstream service, 4 data/parse, 5 evaluation.
inline int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Config: return 2;
    case ErrorKind::Upstream: return 3;
    case ErrorKind::Data: return 4;
    case ErrorKind::Eval: return 5;
  }
  return 1;
}

}  // namespace ccas
