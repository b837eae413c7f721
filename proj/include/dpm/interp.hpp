#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <variant>
#include <vector>

#include "dpm/syntax.hpp"

namespace dpm {

// A shareable subproblem: an expression together with the environment
// restricted to the expression's free variables. Two arguments denote the
// same subproblem iff both ids match.
struct InterpreterArg {
  ExprId expression;
  EnvId environment;

  friend bool operator==(const InterpreterArg&, const InterpreterArg&) = default;
};

struct Frame;

// Immutable chain of frames; null is the empty continuation. Resuming never
// mutates a frame, so one continuation can be resumed with many values.
using Continuation = std::shared_ptr<const Frame>;

struct Terminal {
  ValueId value;
};

struct RandomChoice {
  Continuation k;
  std::vector<ValueId> values;
  std::vector<double> probs;
};

struct Subcall {
  Continuation k;
  InterpreterArg arg;
};

using PartialResult = std::variant<Terminal, RandomChoice, Subcall>;

// Support of an elementary random primitive after dropping zero-mass
// outcomes and merging duplicate values (first-occurrence order).
struct Support {
  std::vector<ValueId> values;
  std::vector<double> probs;
};

Support erpSupport(Store& store, Primitive p, std::span<const ValueId> args, SourceSpan where = {});

// Deterministic primitive application. Throws RuntimeError on type errors.
// Random and higher-order primitives are rejected here.
ValueId applyPrimitive(Store& store, Primitive p, std::span<const ValueId> args, SourceSpan where = {});

// Factored-coroutine interpreter: runs until the first random choice, the
// first application of a non-primitive procedure, or a final value.
class Interpreter {
 public:
  static constexpr std::uint64_t kDefaultStepBudget = 1'000'000;

  explicit Interpreter(Store& store, std::uint64_t stepBudget = kDefaultStepBudget)
      : store_(store), stepBudget_(stepBudget) {}

  PartialResult interpret(const InterpreterArg& arg) const;
  PartialResult resume(const Continuation& k, ValueId v) const;

  // Argument for evaluating a closed top-level expression.
  InterpreterArg entry(ExprId program) const;

  [[nodiscard]] Store& store() const { return store_; }

 private:
  struct State;
  PartialResult run(State state) const;

  Store& store_;
  std::uint64_t stepBudget_;
};

}  // namespace dpm

template <>
struct std::hash<dpm::InterpreterArg> {
  std::size_t operator()(const dpm::InterpreterArg& a) const noexcept {
    return (static_cast<std::size_t>(a.expression.index) << 32) ^ a.environment.index;
  }
};
