#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dpm {

struct SourceSpan {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t line = 0;    // 1-based, 0 when unknown
  std::size_t column = 0;  // 1-based
};

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  // Stable short name used in machine-readable error objects.
  [[nodiscard]] virtual const char* kind() const noexcept { return "Error"; }
};

class SyntaxError : public Error {
 public:
  SyntaxError(const std::string& message, std::size_t line, std::size_t column);
  [[nodiscard]] const char* kind() const noexcept override { return "SyntaxError"; }
  std::size_t line;
  std::size_t column;
};

class RuntimeError : public Error {
 public:
  RuntimeError(const std::string& message, SourceSpan span = {});
  [[nodiscard]] const char* kind() const noexcept override { return "RuntimeError"; }
  SourceSpan span;
};

// Deterministic reductions between two yields ran past the step budget.
class StepBudgetExceeded : public RuntimeError {
 public:
  using RuntimeError::RuntimeError;
  [[nodiscard]] const char* kind() const noexcept override { return "StepBudgetExceeded"; }
};

class BudgetExceeded : public Error {
 public:
  using Error::Error;
  [[nodiscard]] const char* kind() const noexcept override { return "BudgetExceeded"; }
};

class GraphError : public Error {
 public:
  using Error::Error;
  [[nodiscard]] const char* kind() const noexcept override { return "GraphError"; }
};

class MissingReference : public Error {
 public:
  using Error::Error;
  [[nodiscard]] const char* kind() const noexcept override { return "MissingReference"; }
};

class NoConvergence : public Error {
 public:
  NoConvergence(const std::string& message, double residual, std::size_t iterations)
      : Error(message), residual(residual), iterations(iterations) {}
  [[nodiscard]] const char* kind() const noexcept override { return "NoConvergence"; }
  double residual;
  std::size_t iterations;
};

class ZeroMass : public Error {
 public:
  using Error::Error;
  [[nodiscard]] const char* kind() const noexcept override { return "ZeroMass"; }
};

}  // namespace dpm
