#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace emo {

enum class ErrorKind {
  schema,
  validation,
  config,
  lookup,
  argument,
  io,
  transport,
  protocol,
  completeness,
  alignment,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::schema: return "schema";
    case ErrorKind::validation: return "validation";
    case ErrorKind::config: return "config";
    case ErrorKind::lookup: return "lookup";
    case ErrorKind::argument: return "argument";
    case ErrorKind::io: return "io";
    case ErrorKind::transport: return "transport";
    case ErrorKind::protocol: return "protocol";
    case ErrorKind::completeness: return "completeness";
    case ErrorKind::alignment: return "alignment";
  }
  return "unknown";
}

// Every failure raised by the library. The kind lets callers (and tests)
// distinguish categories without a parallel class hierarchy.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + " error: " + message),
        kind_(kind),
        detail_(message) {}

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorKind kind_;
  std::string detail_;
};

// Error raised by the runner; carries the pipeline stage it came from.
class StageError : public Error {
 public:
  StageError(std::string stage, const Error& cause)
      : Error(cause.kind(), "[" + stage + "] " + cause.detail()),
        stage_(std::move(stage)) {}

  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

}  // namespace emo
