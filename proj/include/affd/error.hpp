#pragma once

#include <stdexcept>
#include <string>

namespace affd {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed container or payload (WAV chunk, feature file, checkpoint).
class DecodeError : public Error {
 public:
  using Error::Error;
};

class UnsupportedFormatError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration value (non power-of-two FFT size, fmax above Nyquist, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Tensor or matrix shapes that do not line up.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Argument outside the mathematical domain of a function.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Audio with less than one full analysis segment.
class AudioTooShortError : public DomainError {
 public:
  using DomainError::DomainError;
};

/// Metric computed on a sample set that lacks one of the two classes.
class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace affd
