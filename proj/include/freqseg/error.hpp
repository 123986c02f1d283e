#pragma once

#include <stdexcept>
#include <string>

namespace freqseg {

/// Base for every error raised by the library. The CLI maps subclasses to
/// exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor or image shapes disagree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A scalar argument is outside its domain (stride, ratio, scale, ...).
class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// Model, training or config-file settings are inconsistent.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Input is mathematically degenerate (zero spectrum, single-element batch
/// statistics).
class DegenerateError : public Error {
 public:
  using Error::Error;
};

/// NaN or Inf appeared where a finite value is required.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Checkpoint checksum or framing mismatch.
class IntegrityError : public Error {
 public:
  using Error::Error;
};

}  // namespace freqseg
