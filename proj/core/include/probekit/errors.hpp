#pragma once

#include <stdexcept>
#include <string>

namespace probekit {

// Base for every data-level failure raised by the library. The CLI maps
// anything derived from Error to exit code 2.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed on-disk content.
class FormatError : public Error {
 public:
  using Error::Error;
};

class BadMagicError : public FormatError {
 public:
  using FormatError::FormatError;
};

class UnsupportedVersionError : public FormatError {
 public:
  using FormatError::FormatError;
};

class TruncatedError : public FormatError {
 public:
  using FormatError::FormatError;
};

class InvalidOffsetsError : public FormatError {
 public:
  using FormatError::FormatError;
};

class NonFiniteError : public FormatError {
 public:
  using FormatError::FormatError;
};

// A value violates a documented invariant or precondition.
class InvariantError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  // Message reads "<path>: <what>".
  IoError(const std::string& path, const std::string& what);
  const std::string& path() const noexcept { return path_; }

 protected:
  struct Preformatted {};
  IoError(Preformatted, const std::string& path, const std::string& message);

 private:
  std::string path_;
};

class NotFoundError : public IoError {
 public:
  explicit NotFoundError(const std::string& path);
};

}  // namespace probekit
