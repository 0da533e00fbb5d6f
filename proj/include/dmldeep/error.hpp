#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dmldeep {

// Process exit code associated with each error family.
enum class ErrorKind { validation = 2, numerical = 3, io = 4 };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }
  int exit_code() const noexcept { return static_cast<int>(kind_); }

 private:
  ErrorKind kind_;
};

class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& what) : Error(ErrorKind::validation, what) {}
};

class SchemaError : public ValidationError {
 public:
  explicit SchemaError(const std::string& what) : ValidationError("schema mismatch: " + what) {}
};

class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what) : Error(ErrorKind::numerical, what) {}
};

// Input whose variance is zero where a scale is required.
class DegenerateError : public NumericalError {
 public:
  explicit DegenerateError(const std::string& what) : NumericalError("degenerate: " + what) {}
};

// Residual treatment variation too small to identify theta.
class WeakIdentificationError : public NumericalError {
 public:
  explicit WeakIdentificationError(const std::string& what)
      : NumericalError("weak residual variation: " + what) {}
};

class TrainingDivergedError : public NumericalError {
 public:
  TrainingDivergedError(std::size_t epoch, const std::string& what)
      : NumericalError("training diverged at epoch " + std::to_string(epoch) + ": " + what),
        epoch_(epoch) {}
  std::size_t epoch() const noexcept { return epoch_; }

 private:
  std::size_t epoch_;
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorKind::io, what) {}
};

}  // namespace dmldeep
