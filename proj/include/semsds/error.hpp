#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace semsds {

enum class ErrorKind {
  InvalidParameter,
  InvalidInput,
  NotFound,
  InvalidState,
  Validation,
  Transport,
  Configuration,
  Io,
};

const char* to_string(ErrorKind kind) noexcept;

/// Base exception for every recoverable failure raised by the library.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// One problem found while checking or executing untrusted input.
/// `index` is a statement index for programs, -1 when not applicable.
struct Diagnostic {
  int index = -1;
  std::string where;
  std::string message;

  std::string str() const;
};

/// Raised when a layout program or region tree fails validation.
class ValidationError : public Error {
 public:
  explicit ValidationError(std::vector<Diagnostic> diagnostics);

  const std::vector<Diagnostic>& diagnostics() const noexcept { return diagnostics_; }

 private:
  std::vector<Diagnostic> diagnostics_;
};

/// Raised when a remote service fails after exhausting its retries.
class TransportError : public Error {
 public:
  TransportError(const std::string& message, int attempts)
      : Error(ErrorKind::Transport, message), attempts_(attempts) {}

  int attempts() const noexcept { return attempts_; }

 private:
  int attempts_;
};

[[noreturn]] void throw_error(ErrorKind kind, const std::string& message);

}  // namespace semsds
