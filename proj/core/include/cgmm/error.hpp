#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cgmm {

// Base for every error the library raises.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shape or value violations in caller-supplied data.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

// CSV / config parsing failure. Row and column are 1-based; 0 means "not applicable".
class ParseError : public InvalidInput {
 public:
  ParseError(const std::string& what, std::size_t row, std::size_t column)
      : InvalidInput(Format(what, row, column)), row_(row), column_(column) {}

  std::size_t row() const noexcept { return row_; }
  std::size_t column() const noexcept { return column_; }

 private:
  static std::string Format(const std::string& what, std::size_t row, std::size_t column) {
    std::string out = what;
    if (row > 0) out += " (row " + std::to_string(row);
    if (column > 0) out += (row > 0 ? ", column " : " (column ") + std::to_string(column);
    if (row > 0 || column > 0) out += ")";
    return out;
  }

  std::size_t row_;
  std::size_t column_;
};

// The moment conditions do not pin down a unique parameter.
class IdentificationError : public Error {
 public:
  using Error::Error;
};

// Weight matrix is not symmetric positive definite or cannot be built.
class WeightError : public Error {
 public:
  using Error::Error;
};

// Residual-based weight is identically zero (noiseless data).
class DegenerateWeightError : public WeightError {
 public:
  using WeightError::WeightError;
};

// Variance assembly failed.
class InferenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace cgmm
