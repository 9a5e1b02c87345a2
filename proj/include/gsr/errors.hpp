// Copyright (c) 2026, The gsrtr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace gsr {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input data or configuration (schema, vocabulary, frame mismatch).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Tensor extents that do not fit an operation.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A forward value became NaN or infinite.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// File system or container format failures.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace gsr
