#pragma once

#include <stdexcept>
#include <string>

namespace siren2 {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid argument: bad shape, out-of-range parameter, empty input.
class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// Malformed file contents.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Well-formed file using an encoding we do not decode (e.g. mu-law audio).
class UnsupportedFormatError : public FormatError {
 public:
  using FormatError::FormatError;
};

/// A container that decodes to zero samples.
class EmptySignalError : public Error {
 public:
  using Error::Error;
};

/// A quantity that is mathematically undefined for the given input, such as
/// the SNR or spectral centroid of an all-zero signal.
class UndefinedQuantityError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Non-finite value encountered during numerical work.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace siren2
