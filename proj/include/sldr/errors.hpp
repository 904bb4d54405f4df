#pragma once

#include <stdexcept>
#include <string>

namespace sldr {

// Dimension mismatch between vectors, matrices or network layers.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Out-of-domain scalar argument (tau outside [0,1], bad object index, ...).
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Non-finite loss or gradient.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// API called in the wrong state (step after done, sampling an empty buffer).
class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Malformed checkpoint, config or metrics file.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace sldr
