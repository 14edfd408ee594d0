#include "semsds/error.hpp"

namespace semsds {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::InvalidParameter: return "invalid-parameter";
    case ErrorKind::InvalidInput: return "invalid-input";
    case ErrorKind::NotFound: return "not-found";
    case ErrorKind::InvalidState: return "invalid-state";
    case ErrorKind::Validation: return "validation";
    case ErrorKind::Transport: return "transport";
    case ErrorKind::Configuration: return "configuration";
    case ErrorKind::Io: return "io";
  }
  return "unknown";
}

std::string Diagnostic::str() const {
  std::string out;
  if (!where.empty()) out += where + ": ";
  if (index >= 0) out += "statement " + std::to_string(index) + ": ";
  out += message;
  return out;
}

namespace {

std::string join_diagnostics(const std::vector<Diagnostic>& diagnostics) {
  std::string out;
  for (const auto& d : diagnostics) {
    if (!out.empty()) out += "; ";
    out += d.str();
  }
  return out.empty() ? std::string("validation failed") : out;
}

}  // namespace

ValidationError::ValidationError(std::vector<Diagnostic> diagnostics)
    : Error(ErrorKind::Validation, join_diagnostics(diagnostics)),
      diagnostics_(std::move(diagnostics)) {}

void throw_error(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace semsds
