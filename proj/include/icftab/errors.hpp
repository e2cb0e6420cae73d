#pragma once

#include <stdexcept>
#include <string>

namespace icftab {

/// Invalid user-supplied configuration (CLI exit code 2).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input data (CLI exit code 3).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// CSV header does not match the schema sidecar.
class SchemaError : public DataError {
 public:
  using DataError::DataError;
};

/// Cell that failed to parse, with its location.
class ParseError : public DataError {
 public:
  ParseError(const std::string& what, std::size_t row, std::size_t col)
      : DataError(what), row_(row), col_(col) {}
  std::size_t row() const { return row_; }
  std::size_t col() const { return col_; }

 private:
  std::size_t row_;
  std::size_t col_;
};

/// Iterative special-function evaluation failed to converge.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Internal invariant broken between cooperating components.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace icftab
