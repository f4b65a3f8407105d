#pragma once

#include <stdexcept>
#include <string>

namespace dcm {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed arguments: dimension mismatches, out-of-range indices, bad flags.
class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// A user-supplied matrix or configuration failed validation.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// A factorization or decomposition failed.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Enumeration requested above the configured cap.
class CapacityError : public Error {
 public:
  using Error::Error;
};

/// Input data inconsistent with the model or file schema.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Feature schema mismatch between a fit artifact and a dataset.
class SchemaError : public DataError {
 public:
  using DataError::DataError;
};

/// The optimizer could not find a point of finite log-posterior.
class FitError : public Error {
 public:
  using Error::Error;
};

/// Evaluation at a point where the objective is -inf.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// MCMC tuning failed or convergence diagnostics rejected a posterior.
class DiagnosticsError : public Error {
 public:
  using Error::Error;
};

}  // namespace dcm
