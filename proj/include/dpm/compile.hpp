#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <unordered_map>
#include <unordered_set>
#include <variant>
#include <vector>

#include "dpm/fspn.hpp"
#include "dpm/interp.hpp"

namespace dpm {

struct CompileLimits {
  std::uint64_t taskBudget = 10'000'000;
  std::uint64_t nodeBudget = 10'000'000;
  std::uint64_t stepBudget = Interpreter::kDefaultStepBudget;
};

// Deferred interpreter work: either start a subproblem or resume a
// continuation with a value.
struct StartThunk {
  InterpreterArg arg;
};
struct ResumeThunk {
  Continuation k;
  ValueId value;
};
using Thunk = std::variant<StartThunk, ResumeThunk>;

struct Task {
  Thunk thunk;
  NodeId prevNode;
  double weight = 1.0;
};

// Values in first-discovery order with O(1) membership on interned ids.
class TerminalSet {
 public:
  bool insert(ValueId v) {
    if (!seen_.insert(v).second) return false;
    order_.push_back(v);
    return true;
  }
  [[nodiscard]] bool contains(ValueId v) const { return seen_.contains(v); }
  [[nodiscard]] const std::vector<ValueId>& values() const { return order_; }
  [[nodiscard]] std::size_t size() const { return order_.size(); }

 private:
  std::vector<ValueId> order_;
  std::unordered_set<ValueId> seen_;
};

struct Callback {
  NodeId node;
  Continuation k;
};

struct CompileState {
  std::deque<Task> queue;
  std::map<NodeId, TerminalSet> terminals;
  std::map<NodeId, std::vector<Callback>> callbacks;
  std::unordered_map<InterpreterArg, NodeId> subproblem;
  std::map<NodeId, InterpreterArg> subproblemOf;  // inverse of `subproblem`
  std::uint64_t tasksRun = 0;
};

struct Compilation {
  Fspn graph;
  CompileState state;
};

// Explores every execution path of `program`, building a factored
// sum-product network that shares repeated subcalls.
Compilation buildFspn(Store& store, ExprId program, const CompileLimits& limits = {});
Compilation buildFspn(Store& store, const Program& program, const CompileLimits& limits = {});

// Connects a waiting call site to a newly known return value `v` of `root`
// and schedules the continuation.
void processTerminal(Fspn& g, CompileState& state, NodeId root, ValueId v, NodeId prevNode, const Continuation& k);

}  // namespace dpm
