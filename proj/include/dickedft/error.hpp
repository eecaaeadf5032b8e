// Copyright 2026 The dickedft Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace dickedft {

/// Process exit codes used by the command-line driver.
enum class ExitCode : int {
  kOk = 0,
  kNumerical = 1,
  kConfig = 2,
  kSizing = 3,
};

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual ExitCode exit_code() const noexcept { return ExitCode::kNumerical; }
};

/// Invalid parameters or configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::kConfig; }
};

/// Requested problem exceeds a dimension cap.
class SizingError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::kSizing; }
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Target density on the cube boundary, which no potential represents.
class BoundaryError : public DomainError {
 public:
  using DomainError::DomainError;
};

/// An iterative method failed to reach its tolerance.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

/// Precondition of a diagnostic (e.g. "psi is a ground state") does not hold.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// Ensemble target outside the convex hull of achievable density pairs.
class InfeasibleError : public Error {
 public:
  InfeasibleError(const std::string& what, double distance)
      : Error(what), distance_(distance) {}
  double distance() const noexcept { return distance_; }

 private:
  double distance_;
};

}  // namespace dickedft
