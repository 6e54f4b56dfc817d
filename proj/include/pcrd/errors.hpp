#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace pcrd {

// Category strings double as the machine-parseable prefix printed by the CLI.
class Error : public std::runtime_error {
 public:
  Error(std::string category, const std::string& message)
      : std::runtime_error(message), category_(std::move(category)) {}
  const std::string& category() const noexcept { return category_; }

 private:
  std::string category_;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& message, int line)
      : Error("PARSE", message + " (line " + std::to_string(line) + ")"),
        line_(line) {}
  int line() const noexcept { return line_; }

 private:
  int line_ = 0;
};

class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& message)
      : Error("VALIDATION", message) {}
};

class NoRouteError : public Error {
 public:
  explicit NoRouteError(const std::string& message)
      : Error("NO_ROUTE", message) {}
};

class ZoneDisconnectedError : public Error {
 public:
  explicit ZoneDisconnectedError(const std::string& message)
      : Error("ZONE_DISCONNECTED", message) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& message)
      : Error("CONFIG", message) {}
};

class IllegalActionError : public Error {
 public:
  explicit IllegalActionError(const std::string& message)
      : Error("ILLEGAL_ACTION", message) {}
};

class DegenerateDenominatorError : public Error {
 public:
  explicit DegenerateDenominatorError(const std::string& message)
      : Error("DEGENERATE_DENOMINATOR", message) {}
};

class LengthMismatchError : public Error {
 public:
  explicit LengthMismatchError(const std::string& message)
      : Error("LENGTH_MISMATCH", message) {}
};

class EmptyInputError : public Error {
 public:
  explicit EmptyInputError(const std::string& message)
      : Error("EMPTY_INPUT", message) {}
};

class GatewayError : public Error {
 public:
  explicit GatewayError(const std::string& message)
      : Error("TRANSPORT", message) {}
};

class AuthError : public Error {
 public:
  explicit AuthError(const std::string& message) : Error("AUTH", message) {}
};

class ExtractionError : public Error {
 public:
  explicit ExtractionError(const std::string& message)
      : Error("EXTRACTION", message) {}
};

class PipelineAbortError : public Error {
 public:
  explicit PipelineAbortError(const std::string& message)
      : Error("PIPELINE", message) {}
};

}  // namespace pcrd
