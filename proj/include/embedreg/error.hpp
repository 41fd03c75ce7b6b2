#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace embedreg {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A value does not satisfy a type invariant (bad ParamSpec, bad assignment, ...).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// A row of an ingested file failed validation. `row` is 1-based over data rows.
class RowValidationError : public ValidationError {
 public:
  RowValidationError(std::size_t row, const std::string& what)
      : ValidationError("row " + std::to_string(row) + ": " + what), row_(row) {}
  std::size_t row() const noexcept { return row_; }

 private:
  std::size_t row_;
};

/// Header of an offline file does not match the task parameters.
class SchemaError : public ValidationError {
 public:
  SchemaError(const std::string& what, std::vector<std::string> offending)
      : ValidationError(what), offending_(std::move(offending)) {}
  const std::vector<std::string>& offending() const noexcept { return offending_; }

 private:
  std::vector<std::string> offending_;
};

class UnsupportedSourceError : public Error {
 public:
  using Error::Error;
};

class TooFewExamplesError : public Error {
 public:
  using Error::Error;
};

class DimensionMismatchError : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class EmptyInputError : public Error {
 public:
  using Error::Error;
};

class UndefinedMetricError : public Error {
 public:
  using Error::Error;
};

class TrainingDivergedError : public Error {
 public:
  using Error::Error;
};

class TransportError : public Error {
 public:
  using Error::Error;
};

class EmbeddingFormatError : public Error {
 public:
  using Error::Error;
};

class InfeasibleRadiusError : public Error {
 public:
  using Error::Error;
};

}  // namespace embedreg
