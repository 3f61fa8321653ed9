#pragma once

#include <stdexcept>
#include <string>

namespace tvhazard {

/// Bad input: malformed data, violated preconditions, inconsistent dimensions.
class ValidationError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// The numerics broke down (non-finite objective, undefined gradient).
class NumericalError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// File system trouble, including refusal to overwrite.
class IoError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Parse failure in a line-oriented file; `line` is 1-based.
class ParseError : public ValidationError {
public:
  ParseError(const std::string& what, std::size_t line)
      : ValidationError("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

private:
  std::size_t line_;
};

/// Non-fatal condition surfaced to the caller, e.g. an observation the model
/// gives zero probability.
struct Warning {
  std::string code;
  std::string observation_id;
  std::string message;
};

}  // namespace tvhazard
