#include "dpm/compile.hpp"

#include <string>

namespace dpm {

void processTerminal(Fspn& g, CompileState& state, NodeId root, ValueId v, NodeId prevNode, const Continuation& k) {
  NodeId owner = g.rootOf(prevNode);
  NodeId product = g.addNode(NodeKind::Product, owner);
  NodeId ref = g.addNode(NodeKind::Ref, owner, v, root);
  g.addEdge(prevNode, product, 1.0);
  g.addEdge(product, ref, 1.0);
  state.queue.push_back({ResumeThunk{k, v}, product, 1.0});
}

namespace {

[[noreturn]] void overBudget(const Store& store, const Compilation& c, const std::string& what) {
  NodeId widest;
  std::size_t widestCount = 0;
  for (const auto& [root, values] : c.state.terminals) {
    if (values.size() > widestCount) {
      widest = root;
      widestCount = values.size();
    }
  }
  std::string message = what + " exceeded (" + std::to_string(c.state.tasksRun) + " tasks, " +
                        std::to_string(c.graph.nodeCount()) + " nodes); the program may have infinite support";
  if (widest.valid()) {
    message += "; largest frontier: root " + std::to_string(widest.index) + " with " + std::to_string(widestCount) +
               " return values";
    if (auto it = c.state.subproblemOf.find(widest); it != c.state.subproblemOf.end()) {
      const SourceSpan& s = store.expr(it->second.expression).span;
      message += " (expression at " + std::to_string(s.line) + ":" + std::to_string(s.column) + ")";
    }
  }
  throw BudgetExceeded(message);
}

}  // namespace

Compilation buildFspn(Store& store, ExprId program, const CompileLimits& limits) {
  Interpreter interp(store, limits.stepBudget);
  Compilation c;
  Fspn& g = c.graph;
  CompileState& st = c.state;

  NodeId global = g.addRoot();
  st.terminals[global];
  st.queue.push_back({StartThunk{interp.entry(program)}, global, 1.0});

  while (!st.queue.empty()) {
    if (st.tasksRun >= limits.taskBudget) overBudget(store, c, "task budget");
    Task task = std::move(st.queue.front());
    st.queue.pop_front();
    ++st.tasksRun;

    PartialResult x = std::visit(
        [&](const auto& thunk) -> PartialResult {
          using T = std::decay_t<decltype(thunk)>;
          if constexpr (std::is_same_v<T, StartThunk>) {
            return interp.interpret(thunk.arg);
          } else {
            return interp.resume(thunk.k, thunk.value);
          }
        },
        task.thunk);

    const NodeId owner = g.rootOf(task.prevNode);
    NodeId current;
    if (auto* terminal = std::get_if<Terminal>(&x)) {
      current = g.addNode(NodeKind::Indicator, owner, terminal->value);
      TerminalSet& known = st.terminals[owner];
      if (!known.contains(terminal->value)) {
        for (const Callback& cb : st.callbacks[owner]) processTerminal(g, st, owner, terminal->value, cb.node, cb.k);
        known.insert(terminal->value);
      }
    } else if (auto* choice = std::get_if<RandomChoice>(&x)) {
      current = g.addNode(NodeKind::Sum, owner);
      for (std::size_t i = 0; i < choice->values.size(); ++i) {
        if (choice->probs[i] > 0.0) st.queue.push_back({ResumeThunk{choice->k, choice->values[i]}, current, choice->probs[i]});
      }
    } else {
      auto& call = std::get<Subcall>(x);
      current = g.addNode(NodeKind::Sum, owner);
      NodeId root;
      if (auto it = st.subproblem.find(call.arg); it == st.subproblem.end()) {
        root = g.addRoot();
        st.subproblem.emplace(call.arg, root);
        st.subproblemOf.emplace(root, call.arg);
        st.terminals[root];
        st.queue.push_back({StartThunk{call.arg}, root, 1.0});
      } else {
        root = it->second;
        for (ValueId v : st.terminals[root].values()) processTerminal(g, st, root, v, current, call.k);
      }
      st.callbacks[root].push_back({current, call.k});
    }
    g.addEdge(task.prevNode, current, task.weight);

    if (g.nodeCount() > limits.nodeBudget) overBudget(store, c, "node budget");
  }
  return c;
}

Compilation buildFspn(Store& store, const Program& program, const CompileLimits& limits) {
  return buildFspn(store, program.entry, limits);
}

}  // namespace dpm
