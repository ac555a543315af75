#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace bvlmc {

// Three families, mapped to distinct CLI exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input data or model files.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Optimizer or distribution-function failure.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Violated precondition on an API call (bad argument, wrong tree shape).
class UsageError : public Error {
 public:
  using Error::Error;
};

class MalformedModel : public DataError {
 public:
  using DataError::DataError;
};

class HistoryTooShort : public UsageError {
 public:
  using UsageError::UsageError;
};

class RootHasNoSiblings : public UsageError {
 public:
  using UsageError::UsageError;
};

class ChildrenNotLeaves : public UsageError {
 public:
  using UsageError::UsageError;
};

class LagMismatch : public UsageError {
 public:
  using UsageError::UsageError;
};

class DomainError : public UsageError {
 public:
  using UsageError::UsageError;
};

class DataTooShort : public DataError {
 public:
  using DataError::DataError;
};

class NestingViolation : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class AllFitsFailed : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class UnknownModel : public UsageError {
 public:
  using UsageError::UsageError;
};

class AlphabetMismatch : public UsageError {
 public:
  using UsageError::UsageError;
};

class MissingColumn : public DataError {
 public:
  using DataError::DataError;
};

class NonNumericCell : public DataError {
 public:
  NonNumericCell(std::size_t row, const std::string& column, const std::string& text)
      : DataError("non-numeric cell at row " + std::to_string(row) + ", column \"" + column + "\": \"" + text + "\""),
        row_(row),
        column_(column) {}
  std::size_t row() const { return row_; }
  const std::string& column() const { return column_; }

 private:
  std::size_t row_;
  std::string column_;
};

class EmptyAfterTransform : public DataError {
 public:
  using DataError::DataError;
};

}  // namespace bvlmc
