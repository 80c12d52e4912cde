#pragma once

#include <stdexcept>
#include <string>

namespace msf {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class RangeError : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class LengthError : public Error {
 public:
  using Error::Error;
};

class EmptyInputError : public Error {
 public:
  using Error::Error;
};

// Gram matrix failed the pivot test; `pivot` is the 0-based column where it failed.
class RankError : public Error {
 public:
  RankError(const std::string& what, long pivot) : Error(what), pivot_(pivot) {}
  long pivot() const noexcept { return pivot_; }

 private:
  long pivot_;
};

class NotPositiveDefiniteError : public RankError {
 public:
  using RankError::RankError;
};

class PriorRejectionError : public Error {
 public:
  using Error::Error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  ConfigError(const std::string& field, const std::string& what)
      : Error(field + ": " + what), field_(field) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

class InitializationError : public Error {
 public:
  using Error::Error;
};

class FileError : public Error {
 public:
  using Error::Error;
};

}  // namespace msf
