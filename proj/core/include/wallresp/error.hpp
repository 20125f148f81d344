#pragma once

#include <stdexcept>
#include <string>

#include "wallresp/types.hpp"

namespace wallresp {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not line up; the message carries both shapes.
class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

/// Cholesky met a non-positive pivot. `pivot()` is 1-based.
class NotPositiveDefinite : public Error {
 public:
  NotPositiveDefinite(const std::string& what, Index pivot) : Error(what), pivot_(pivot) {}
  Index pivot() const { return pivot_; }

 private:
  Index pivot_;
};

/// LU met a pivot that is zero to working precision. `pivot()` is 1-based.
class SingularMatrix : public Error {
 public:
  SingularMatrix(const std::string& what, Index pivot) : Error(what), pivot_(pivot) {}
  Index pivot() const { return pivot_; }

 private:
  Index pivot_;
};

/// Division by a zero scale factor. `row()` is 1-based.
class ZeroDivisor : public Error {
 public:
  ZeroDivisor(const std::string& what, Index row) : Error(what), row_(row) {}
  Index row() const { return row_; }

 private:
  Index row_;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Raised inside the pipeline, naming the stage in which the failure occurred.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& what)
      : Error("stage " + stage + ": " + what), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

}  // namespace wallresp
