#pragma once

#include <stdexcept>
#include <string>

namespace tsnmt {

// Base of every library error. The CLI maps the subclasses to exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shape disagreement between operands.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Argument outside the mathematical domain of an operation (e.g. log(0)).
class DomainError : public Error {
 public:
  using Error::Error;
};

class IndexError : public Error {
 public:
  using Error::Error;
};

// Violated precondition of an API call.
class ContractError : public Error {
 public:
  using Error::Error;
};

// Inconsistent configuration (missing teacher, vocabulary mismatch, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed or inconsistent input data (misaligned files, capacity, ...).
class DataError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf produced or consumed where finite values are required.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace tsnmt
