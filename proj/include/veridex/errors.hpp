// Copyright 2026 The Veridex Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace veridex {

// Base of every error the library raises. The CLI maps each family to an
// exit code: ConfigError -> 1, DataError / DimensionError / NumericError -> 2,
// BackendError -> 3.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration or command-line usage.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed, missing, corrupted or inconsistent input data.
class DataError : public Error {
 public:
  using Error::Error;
};

// Tensor or vector extents that do not compose.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf produced during computation.
class NumericError : public Error {
 public:
  using Error::Error;
};

enum class BackendFailure {
  kNetwork,
  kTimeout,
  kHttpStatus,
  kCredentials,
  kCannedMiss,
  kMalformedResponse,
};

// Failure of a text-generation backend.
class BackendError : public Error {
 public:
  BackendError(BackendFailure kind, const std::string& what, int attempts = 1)
      : Error(what), kind_(kind), attempts_(attempts) {}

  BackendFailure kind() const noexcept { return kind_; }
  int attempts() const noexcept { return attempts_; }

 private:
  BackendFailure kind_;
  int attempts_;
};

}  // namespace veridex
