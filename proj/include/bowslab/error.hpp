#pragma once

#include <stdexcept>
#include <string>

namespace bowslab {

// Root of every failure raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A file could not be opened, read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

// Malformed or unsupported file contents.
class FormatError : public Error {
 public:
  enum class Kind { MalformedHeader, UnsupportedMaxval, TruncatedPayload, LengthMismatch, BadRecord };

  FormatError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

// Image or transform dimensions that do not fit together.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Parameter outside its documented domain.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Embedding strength search could not reach its target.
class CalibrationError : public Error {
 public:
  using Error::Error;
};

}  // namespace bowslab
