#pragma once

#include <stdexcept>
#include <string>

namespace icam {

/// Root of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not agree with an operation's contract.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A configuration value is outside its declared range.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// backward() was asked for a gradient of something it never recorded.
class UntapedTargetError : public Error {
 public:
  using Error::Error;
};

/// Malformed file contents. `field()` names the offending part of the file.
class ParseError : public Error {
 public:
  ParseError(std::string field, const std::string& message)
      : Error(message), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace icam
