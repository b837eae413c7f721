#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "dpm/compile.hpp"
#include "dpm/fspn.hpp"
#include "json.hpp"

namespace dpm {

// m[root, value]: probability that subproblem `root` returns `value`.
struct Variable {
  NodeId root;
  ValueId value;
};

// coefficient * product of variables; repeated indices encode powers.
struct Monomial {
  double coefficient = 0.0;
  std::vector<std::uint32_t> factors;  // sorted
};

using Polynomial = std::vector<Monomial>;

double evaluatePolynomial(const Polynomial& p, std::span<const double> x);

// x = F(x) with one nonnegative polynomial right-hand side per variable.
struct EquationSystem {
  std::vector<Variable> variables;
  std::vector<Polynomial> rhs;

  [[nodiscard]] std::optional<std::uint32_t> find(NodeId root, ValueId value) const;
  [[nodiscard]] std::size_t monomialCount() const;

  std::map<std::pair<NodeId, ValueId>, std::uint32_t> index;
};

inline constexpr std::size_t kDefaultMonomialBudget = 1'000'000;

// One equation per (root, known return value), obtained by expanding the
// root's subgraph with indicators fixed to that value and references
// replaced by variables.
EquationSystem extractEquations(const Fspn& g, const std::map<NodeId, TerminalSet>& terminals,
                                std::size_t monomialBudget = kDefaultMonomialBudget);

using Component = std::vector<std::uint32_t>;

// Strongly connected components of the variable dependency graph, each
// listed after every component it depends on.
std::vector<Component> sccDecompose(const EquationSystem& sys);

enum class SolverKind : std::uint8_t { Fixpoint, Newton };
enum class SolveMethod : std::uint8_t { Direct, Fixpoint, Newton };

std::string_view solveMethodName(SolveMethod m);

struct SolverOptions {
  SolverKind solver = SolverKind::Fixpoint;
  double tol = 1e-10;
  std::size_t maxIter = 1'000'000;
  // Closed-form solve of singletons that are constant or linear in themselves.
  bool simplify = true;
};

struct ComponentResult {
  std::vector<double> values;  // parallel to the component
  SolveMethod method = SolveMethod::Direct;
  std::size_t iterations = 0;
  double residual = 0.0;  // max |x - F(x)|
  bool converged = true;
  bool monotone = true;  // every iterate was >= its predecessor
};

// `assignment` holds final values for every variable outside `comp` that the
// component references; unsolved entries are NaN and trigger logic_error.
ComponentResult solveComponent(const Component& comp, const EquationSystem& sys, std::span<const double> assignment,
                               const SolverOptions& options);

struct ComponentReport {
  Component variables;
  SolveMethod method = SolveMethod::Direct;
  std::size_t iterations = 0;
  double residual = 0.0;
  bool converged = true;
  bool monotone = true;
};

struct SolveReport {
  std::vector<double> assignment;
  std::vector<ComponentReport> components;  // in solve order
};

nlohmann::ordered_json toJson(const SolveReport& report);

// Solves every component in dependency order. Throws NoConvergence when a
// component fails to converge.
SolveReport solveSystem(const EquationSystem& sys, const SolverOptions& options);

struct MarginalOptions {
  SolverOptions solver;
  bool normalize = false;
  std::size_t monomialBudget = kDefaultMonomialBudget;
};

struct Marginal {
  Distribution distribution;
  EquationSystem system;
  SolveReport report;
};

Marginal marginal(const Compilation& c, const MarginalOptions& options = {});

}  // namespace dpm
