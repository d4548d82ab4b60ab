#pragma once

#include <stdexcept>
#include <string>

namespace gclr {

// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

// A row whose Euclidean norm is too small to normalize.
class DegenerateEmbeddingError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed, truncated or foreign binary container.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Checksum mismatch on an otherwise well-formed container.
class IntegrityError : public FormatError {
 public:
  using FormatError::FormatError;
};

class UnsupportedDatasetError : public Error {
 public:
  using Error::Error;
};

class EmptyDenominatorError : public Error {
 public:
  using Error::Error;
};

// Raised by the exact O(n^2) oracles when the dataset is too large.
class OracleScaleError : public Error {
 public:
  using Error::Error;
};

// A moving-average entry used before it was ever written.
class ColdStartError : public Error {
 public:
  using Error::Error;
};

class IndexError : public Error {
 public:
  using Error::Error;
};

// Non-finite loss or gradient during training.
class NumericAbort : public Error {
 public:
  using Error::Error;
};

}  // namespace gclr
