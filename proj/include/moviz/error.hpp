#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace moviz {

/// Base class of every error raised by the engine.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed expression, tasklet, or document text. `position` is a 0-based
/// character offset into the parsed text.
class ParseError : public Error {
 public:
  ParseError(const std::string& message, std::size_t position)
      : Error(message + " at position " + std::to_string(position)), position_(position) {}

  std::size_t position() const noexcept { return position_; }

 private:
  std::size_t position_;
};

/// Symbolic evaluation failure: unbound symbol, division by zero, overflow.
class EvalError : public Error {
 public:
  using Error::Error;
};

/// Structural problem in a program document (schema, references, ranks).
class SchemaError : public Error {
 public:
  using Error::Error;
};

/// Iteration-space simulation failure (out-of-bounds access, budget, bad layout).
class SimulationError : public Error {
 public:
  using Error::Error;
};

}  // namespace moviz
