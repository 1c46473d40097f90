#pragma once

#include <stdexcept>
#include <string>

namespace jointpanel {

// Problems with the input data or with how it was requested to be used.
// The CLI maps these to exit code 2.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Failures while running numerical machinery. The CLI maps these to exit code 3.
class RuntimeFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public DataError {
 public:
  ParseError(std::size_t row, std::string column, const std::string& reason)
      : DataError("row " + std::to_string(row) + ", column '" + column + "': " + reason),
        row_(row),
        column_(std::move(column)) {}

  std::size_t row() const { return row_; }
  const std::string& column() const { return column_; }

 private:
  std::size_t row_;
  std::string column_;
};

class DuplicateRecord : public DataError {
 public:
  using DataError::DataError;
};

class EmptyAfterFilter : public DataError {
 public:
  using DataError::DataError;
};

class DatasetMismatch : public DataError {
 public:
  using DataError::DataError;
};

// M2 asked for y_{i,t-1} where the lag policy says there is none.
class MissingLag : public DataError {
 public:
  using DataError::DataError;
};

class DomainError : public RuntimeFailure {
 public:
  using RuntimeFailure::RuntimeFailure;
};

class InitFailure : public RuntimeFailure {
 public:
  using RuntimeFailure::RuntimeFailure;
};

class InsufficientDraws : public RuntimeFailure {
 public:
  using RuntimeFailure::RuntimeFailure;
};

class NonFiniteLoglik : public RuntimeFailure {
 public:
  using RuntimeFailure::RuntimeFailure;
};

class TooFewDraws : public RuntimeFailure {
 public:
  using RuntimeFailure::RuntimeFailure;
};

class EmptyChains : public RuntimeFailure {
 public:
  using RuntimeFailure::RuntimeFailure;
};

}  // namespace jointpanel
