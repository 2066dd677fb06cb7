#pragma once

#include <stdexcept>
#include <string>

namespace bmsense {

/// Malformed or out-of-contract arguments (shape mismatch, NaN, bad ranges).
class InvalidInputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A dense path was asked for more memory than the desk-scale caps allow.
class CapacityError : public std::length_error {
 public:
  using std::length_error::length_error;
};

/// File-system failures; the message always carries the offending path.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace bmsense
