#pragma once

#include <stdexcept>
#include <string>

namespace morsetrack {

/// Base class for everything this library throws on purpose.
struct error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Malformed expression text. `offset` is the byte position in the source.
struct parse_error : error {
  parse_error(const std::string& msg, std::size_t offset_)
      : error(msg + " (at byte " + std::to_string(offset_) + ")"), offset(offset_) {}
  std::size_t offset;
};

/// Runtime evaluation failure (division by zero, sqrt of a negative, ...).
struct eval_error : error {
  eval_error(const std::string& msg, std::size_t offset_ = 0)
      : error(msg), offset(offset_) {}
  std::size_t offset;
};

/// Violated mathematical precondition (non-equivariant input, bad collar, ...).
struct domain_error : error {
  using error::error;
};

/// Structural problems in scenarios / configs.
struct validation_error : error {
  using error::error;
};

}  // namespace morsetrack
