#include "dpm/solve.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace dpm {

double evaluatePolynomial(const Polynomial& p, std::span<const double> x) {
  double sum = 0.0;
  for (const Monomial& m : p) {
    double term = m.coefficient;
    for (auto f : m.factors) term *= x[f];
    sum += term;
  }
  return sum;
}

std::optional<std::uint32_t> EquationSystem::find(NodeId root, ValueId value) const {
  auto it = index.find({root, value});
  if (it == index.end()) return std::nullopt;
  return it->second;
}

std::size_t EquationSystem::monomialCount() const {
  std::size_t n = 0;
  for (const auto& p : rhs) n += p.size();
  return n;
}

namespace {

using Accumulator = std::map<std::vector<std::uint32_t>, double>;

Polynomial toPolynomial(const Accumulator& acc) {
  Polynomial out;
  out.reserve(acc.size());
  for (const auto& [factors, c] : acc) {
    if (c != 0.0) out.push_back({c, factors});
  }
  return out;
}

Polynomial multiply(const Polynomial& a, const Polynomial& b) {
  Accumulator acc;
  for (const Monomial& x : a) {
    for (const Monomial& y : b) {
      std::vector<std::uint32_t> f;
      f.reserve(x.factors.size() + y.factors.size());
      std::merge(x.factors.begin(), x.factors.end(), y.factors.begin(), y.factors.end(), std::back_inserter(f));
      acc[std::move(f)] += x.coefficient * y.coefficient;
    }
  }
  return toPolynomial(acc);
}

// Expands the subgraph owned by `root` into a polynomial for selection `v`.
Polynomial expandRoot(const Fspn& g, const EquationSystem& sys, NodeId root, ValueId v, std::size_t budget,
                      std::vector<Polynomial>& memo, std::vector<std::uint32_t>& stamp, std::uint32_t epoch) {
  std::vector<std::pair<NodeId, bool>> stack{{root, false}};
  while (!stack.empty()) {
    auto [n, expanded] = stack.back();
    stack.pop_back();
    if (stamp[n.index] == epoch) continue;
    if (!expanded) {
      stack.push_back({n, true});
      for (const Edge& e : g.children(n)) {
        if (stamp[e.to.index] != epoch) stack.push_back({e.to, false});
      }
      continue;
    }
    const Node& node = g.node(n);
    Polynomial p;
    switch (node.kind) {
      case NodeKind::Root:
      case NodeKind::Sum: {
        Accumulator acc;
        for (const Edge& e : g.children(n)) {
          for (const Monomial& m : memo[e.to.index]) acc[m.factors] += e.weight * m.coefficient;
        }
        p = toPolynomial(acc);
        break;
      }
      case NodeKind::Product: {
        p = {{1.0, {}}};
        for (const Edge& e : g.children(n)) {
          p = multiply(p, memo[e.to.index]);
          if (p.empty()) break;
        }
        break;
      }
      case NodeKind::Indicator:
        if (node.value == v) p = {{1.0, {}}};
        break;
      case NodeKind::Ref: {
        auto var = sys.find(node.target, node.value);
        if (!var) throw MissingReference("reference to unknown return value of root " + std::to_string(node.target.index));
        p = {{1.0, {*var}}};
        break;
      }
    }
    if (p.size() > budget) {
      throw BudgetExceeded("equation size budget of " + std::to_string(budget) + " monomials exceeded");
    }
    memo[n.index] = std::move(p);
    stamp[n.index] = epoch;
  }
  return memo[root.index];
}

}  // namespace

EquationSystem extractEquations(const Fspn& g, const std::map<NodeId, TerminalSet>& terminals,
                                std::size_t monomialBudget) {
  EquationSystem sys;
  for (const auto& [root, values] : terminals) {
    for (ValueId v : values.values()) {
      auto id = static_cast<std::uint32_t>(sys.variables.size());
      sys.variables.push_back({root, v});
      sys.index.emplace(std::make_pair(root, v), id);
    }
  }
  sys.rhs.resize(sys.variables.size());
  std::vector<Polynomial> memo(g.nodeCount());
  std::vector<std::uint32_t> stamp(g.nodeCount(), 0);
  std::uint32_t epoch = 0;
  std::size_t total = 0;
  for (std::uint32_t i = 0; i < sys.variables.size(); ++i) {
    const Variable& var = sys.variables[i];
    sys.rhs[i] = expandRoot(g, sys, var.root, var.value, monomialBudget, memo, stamp, ++epoch);
    total += sys.rhs[i].size();
    if (total > monomialBudget) {
      throw BudgetExceeded("equation size budget of " + std::to_string(monomialBudget) + " monomials exceeded");
    }
  }
  return sys;
}

std::vector<Component> sccDecompose(const EquationSystem& sys) {
  const std::size_t n = sys.variables.size();
  std::vector<std::vector<std::uint32_t>> deps(n);
  for (std::size_t u = 0; u < n; ++u) {
    for (const Monomial& m : sys.rhs[u]) deps[u].insert(deps[u].end(), m.factors.begin(), m.factors.end());
    std::sort(deps[u].begin(), deps[u].end());
    deps[u].erase(std::unique(deps[u].begin(), deps[u].end()), deps[u].end());
  }

  constexpr std::uint32_t kUnvisited = std::numeric_limits<std::uint32_t>::max();
  std::vector<std::uint32_t> number(n, kUnvisited);
  std::vector<std::uint32_t> low(n, 0);
  std::vector<bool> onStack(n, false);
  std::vector<std::uint32_t> stack;
  std::vector<Component> out;
  std::uint32_t counter = 0;

  struct Visit {
    std::uint32_t vertex;
    std::size_t next;
  };
  std::vector<Visit> calls;
  for (std::uint32_t start = 0; start < n; ++start) {
    if (number[start] != kUnvisited) continue;
    calls.push_back({start, 0});
    number[start] = low[start] = counter++;
    stack.push_back(start);
    onStack[start] = true;
    while (!calls.empty()) {
      Visit& top = calls.back();
      const std::uint32_t v = top.vertex;
      if (top.next < deps[v].size()) {
        const std::uint32_t w = deps[v][top.next++];
        if (number[w] == kUnvisited) {
          number[w] = low[w] = counter++;
          stack.push_back(w);
          onStack[w] = true;
          calls.push_back({w, 0});
        } else if (onStack[w]) {
          low[v] = std::min(low[v], number[w]);
        }
        continue;
      }
      if (low[v] == number[v]) {
        Component comp;
        std::uint32_t w;
        do {
          w = stack.back();
          stack.pop_back();
          onStack[w] = false;
          comp.push_back(w);
        } while (w != v);
        std::sort(comp.begin(), comp.end());
        out.push_back(std::move(comp));
      }
      calls.pop_back();
      if (!calls.empty()) {
        const std::uint32_t parent = calls.back().vertex;
        low[parent] = std::min(low[parent], low[v]);
      }
    }
  }
  return out;
}

std::string_view solveMethodName(SolveMethod m) {
  switch (m) {
    case SolveMethod::Direct: return "direct";
    case SolveMethod::Fixpoint: return "fixpoint";
    case SolveMethod::Newton: return "newton";
  }
  return "?";
}

namespace {

// Component equations with external variables substituted; factors are
// local indices into the component.
struct LocalSystem {
  std::vector<Polynomial> rhs;

  [[nodiscard]] std::size_t size() const { return rhs.size(); }

  void apply(std::span<const double> x, std::span<double> out) const {
    for (std::size_t i = 0; i < rhs.size(); ++i) out[i] = evaluatePolynomial(rhs[i], x);
  }
};

LocalSystem localize(const Component& comp, const EquationSystem& sys, std::span<const double> assignment) {
  std::map<std::uint32_t, std::uint32_t> local;
  for (std::uint32_t i = 0; i < comp.size(); ++i) local.emplace(comp[i], i);
  LocalSystem out;
  out.rhs.reserve(comp.size());
  for (std::uint32_t var : comp) {
    Accumulator acc;
    for (const Monomial& m : sys.rhs[var]) {
      double c = m.coefficient;
      std::vector<std::uint32_t> factors;
      for (auto f : m.factors) {
        if (auto it = local.find(f); it != local.end()) {
          factors.push_back(it->second);
        } else {
          double value = assignment[f];
          if (std::isnan(value)) {
            throw std::logic_error("component references variable " + std::to_string(f) + " before it is solved");
          }
          c *= value;
        }
      }
      std::sort(factors.begin(), factors.end());
      acc[std::move(factors)] += c;
    }
    out.rhs.push_back(toPolynomial(acc));
  }
  return out;
}

double maxResidual(const LocalSystem& sys, std::span<const double> x) {
  std::vector<double> fx(sys.size());
  sys.apply(x, fx);
  double r = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) r = std::max(r, std::abs(fx[i] - x[i]));
  return r;
}

constexpr double kMassSlack = 1e-9;

// Least fixed point by Kleene iteration from zero.
ComponentResult fixpoint(const LocalSystem& sys, const SolverOptions& options) {
  const std::size_t n = sys.size();
  ComponentResult out;
  out.method = SolveMethod::Fixpoint;
  out.converged = false;
  std::vector<double> x(n, 0.0);
  std::vector<double> y(n, 0.0);
  for (std::size_t it = 1; it <= options.maxIter; ++it) {
    sys.apply(x, y);
    double change = 0.0;
    bool escaped = false;
    for (std::size_t i = 0; i < n; ++i) {
      if (y[i] < x[i]) out.monotone = false;
      change = std::max(change, std::abs(y[i] - x[i]));
      if (!(y[i] <= 1.0 + kMassSlack)) escaped = true;
    }
    x.swap(y);
    out.iterations = it;
    if (escaped) break;  // no solution that is a probability
    if (change <= options.tol) {
      double r = maxResidual(sys, x);
      if (r <= options.tol) {
        out.residual = r;
        out.converged = true;
        break;
      }
    }
  }
  if (!out.converged) out.residual = maxResidual(sys, x);
  out.values = std::move(x);
  return out;
}

// In-place LU with partial pivoting; false when a pivot vanishes.
bool luSolve(std::vector<double> a, std::vector<double>& b, std::size_t n) {
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < n; ++r) {
      if (std::abs(a[r * n + col]) > std::abs(a[pivot * n + col])) pivot = r;
    }
    if (std::abs(a[pivot * n + col]) < 1e-300) return false;
    if (pivot != col) {
      for (std::size_t c = 0; c < n; ++c) std::swap(a[col * n + c], a[pivot * n + c]);
      std::swap(b[col], b[pivot]);
    }
    for (std::size_t r = col + 1; r < n; ++r) {
      double f = a[r * n + col] / a[col * n + col];
      if (f == 0.0) continue;
      for (std::size_t c = col; c < n; ++c) a[r * n + c] -= f * a[col * n + c];
      b[r] -= f * b[col];
    }
  }
  for (std::size_t i = n; i-- > 0;) {
    double s = b[i];
    for (std::size_t c = i + 1; c < n; ++c) s -= a[i * n + c] * b[c];
    b[i] = s / a[i * n + i];
    if (!std::isfinite(b[i])) return false;
  }
  return true;
}

std::vector<double> jacobian(const LocalSystem& sys, std::span<const double> x) {
  const std::size_t n = sys.size();
  std::vector<double> j(n * n, 0.0);
  for (std::size_t row = 0; row < n; ++row) {
    for (const Monomial& m : sys.rhs[row]) {
      for (std::size_t p = 0; p < m.factors.size(); ++p) {
        double d = m.coefficient;
        for (std::size_t q = 0; q < m.factors.size(); ++q) {
          if (q != p) d *= x[m.factors[q]];
        }
        j[row * n + m.factors[p]] += d;
      }
    }
  }
  return j;
}

// Newton on x - F(x) = 0 from zero with the analytic Jacobian.
ComponentResult newton(const LocalSystem& sys, const SolverOptions& options) {
  const std::size_t n = sys.size();
  ComponentResult out;
  out.method = SolveMethod::Newton;
  out.converged = false;
  std::vector<double> x(n, 0.0);
  std::vector<double> fx(n, 0.0);
  for (std::size_t it = 0; it <= options.maxIter; ++it) {
    sys.apply(x, fx);
    double r = 0.0;
    for (std::size_t i = 0; i < n; ++i) r = std::max(r, std::abs(fx[i] - x[i]));
    out.residual = r;
    out.iterations = it;
    if (r <= options.tol) {
      out.converged = true;
      break;
    }
    if (it == options.maxIter) break;
    std::vector<double> a = jacobian(sys, x);
    for (std::size_t i = 0; i < n * n; ++i) a[i] = -a[i];
    for (std::size_t i = 0; i < n; ++i) a[i * n + i] += 1.0;
    std::vector<double> step(n);
    for (std::size_t i = 0; i < n; ++i) step[i] = fx[i] - x[i];
    std::vector<double> rhs = step;
    if (!luSolve(a, step, n)) {
      for (std::size_t i = 0; i < n; ++i) a[i * n + i] += 1e-12;
      step = rhs;
      if (!luSolve(a, step, n)) {
        ComponentResult fallback = fixpoint(sys, options);
        fallback.iterations += out.iterations;
        return fallback;
      }
    }
    bool escaped = false;
    for (std::size_t i = 0; i < n; ++i) {
      double next = x[i] + step[i];
      if (next < x[i]) out.monotone = false;
      x[i] = next;
      if (!(x[i] <= 1.0 + kMassSlack)) escaped = true;
    }
    if (escaped) {
      out.iterations = it + 1;
      out.residual = maxResidual(sys, x);
      break;
    }
  }
  out.values = std::move(x);
  return out;
}

}  // namespace

ComponentResult solveComponent(const Component& comp, const EquationSystem& sys, std::span<const double> assignment,
                               const SolverOptions& options) {
  LocalSystem local = localize(comp, sys, assignment);

  if (options.simplify && local.size() == 1) {
    double constant = 0.0;
    double linear = 0.0;
    bool affine = true;
    for (const Monomial& m : local.rhs[0]) {
      if (m.factors.empty()) {
        constant += m.coefficient;
      } else if (m.factors.size() == 1) {
        linear += m.coefficient;
      } else {
        affine = false;
      }
    }
    // x = a + b x has least nonnegative solution a / (1 - b) when b < 1.
    if (affine && (linear < 1.0 || constant == 0.0)) {
      ComponentResult out;
      out.method = SolveMethod::Direct;
      out.values = {linear == 0.0 ? constant : (constant == 0.0 ? 0.0 : constant / (1.0 - linear))};
      out.residual = maxResidual(local, out.values);
      out.converged = out.values[0] <= 1.0 + kMassSlack;
      return out;
    }
  }
  return options.solver == SolverKind::Newton ? newton(local, options) : fixpoint(local, options);
}

SolveReport solveSystem(const EquationSystem& sys, const SolverOptions& options) {
  SolveReport report;
  report.assignment.assign(sys.variables.size(), std::numeric_limits<double>::quiet_NaN());
  for (Component& comp : sccDecompose(sys)) {
    ComponentResult r = solveComponent(comp, sys, report.assignment, options);
    for (std::size_t i = 0; i < comp.size(); ++i) report.assignment[comp[i]] = r.values[i];
    if (!r.converged) {
      throw NoConvergence("component of " + std::to_string(comp.size()) + " variable(s) did not converge (" +
                              std::string(solveMethodName(r.method)) + ", " + std::to_string(r.iterations) +
                              " iterations, residual " + std::to_string(r.residual) + ")",
                          r.residual, r.iterations);
    }
    report.components.push_back({std::move(comp), r.method, r.iterations, r.residual, r.converged, r.monotone});
  }
  return report;
}

nlohmann::ordered_json toJson(const SolveReport& report) {
  nlohmann::ordered_json comps = nlohmann::ordered_json::array();
  for (const ComponentReport& c : report.components) {
    comps.push_back({{"size", c.variables.size()},
                     {"method", solveMethodName(c.method)},
                     {"iterations", c.iterations},
                     {"residual", c.residual},
                     {"converged", c.converged}});
  }
  return comps;
}

Marginal marginal(const Compilation& c, const MarginalOptions& options) {
  Marginal out;
  out.system = extractEquations(c.graph, c.state.terminals, options.monomialBudget);
  out.report = solveSystem(out.system, options.solver);

  const NodeId global = c.graph.globalRoot();
  Distribution& dist = out.distribution;
  if (auto it = c.state.terminals.find(global); it != c.state.terminals.end()) {
    for (ValueId v : it->second.values()) {
      double p = out.report.assignment[*out.system.find(global, v)];
      if (!(p > 0.0)) p = 0.0;
      dist.mass.emplace_back(v, p);
      dist.totalMass += p;
    }
  }
  if (options.normalize) {
    if (dist.totalMass < options.solver.tol) {
      throw ZeroMass("total mass " + std::to_string(dist.totalMass) + " is zero; the condition has probability 0");
    }
    for (auto& entry : dist.mass) entry.second /= dist.totalMass;
    dist.totalMass = 1.0;
  }
  return out;
}

}  // namespace dpm
