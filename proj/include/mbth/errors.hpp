#pragma once

#include <stdexcept>
#include <string>

namespace mbth {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Arguments outside the documented domain (negative counts, overfull sectors, ...).
class InvalidParameterError : public Error {
 public:
  using Error::Error;
};

/// A Fock state that violates one of the sector conservation laws.
class NotInSectorError : public Error {
 public:
  using Error::Error;
};

/// Basis and parameter set do not describe the same sector.
class DimensionMismatchError : public Error {
 public:
  using Error::Error;
};

/// The eigensolver backend reported a failure; message carries its diagnostic.
class SolverFailureError : public Error {
 public:
  using Error::Error;
};

/// A spectrum with a non-positive level gap where distinct levels are required.
class DegenerateSpectrumError : public Error {
 public:
  using Error::Error;
};

/// No eigenvalue inside the requested energy window.
class EmptyWindowError : public Error {
 public:
  using Error::Error;
};

/// Statistical test input on which the statistic is undefined.
class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

/// Least-squares normal equations singular or preconditions violated.
class FitError : public Error {
 public:
  using Error::Error;
};

/// Spectrum cache file problems, by distinct failure mode.
class CacheError : public Error {
 public:
  using Error::Error;
};
class CorruptFileError : public CacheError {
 public:
  using CacheError::CacheError;
};
class VersionMismatchError : public CacheError {
 public:
  using CacheError::CacheError;
};
class ParameterMismatchError : public CacheError {
 public:
  using CacheError::CacheError;
};

/// Filesystem failures while reading or writing artifacts.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace mbth
