#pragma once

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "dpm/compile.hpp"
#include "dpm/solve.hpp"
#include "enumerator.hpp"
#include "programs.hpp"

namespace dpm::testing {

using TextDist = std::map<std::string, double>;

struct Solved {
  TextDist dist;
  double mass = 0.0;
  std::size_t nodes = 0;
  std::size_t roots = 0;
  SolveReport report;
};

inline Solved solveText(std::string_view text, SolverKind solver = SolverKind::Fixpoint, double tol = 1e-10) {
  Store store;
  Program program = parse(store, text);
  Compilation c = buildFspn(store, program);
  MarginalOptions options;
  options.solver.solver = solver;
  options.solver.tol = tol;
  Marginal m = marginal(c, options);
  Solved out;
  for (const auto& [v, p] : m.distribution.mass) out.dist[store.show(v)] += p;
  out.mass = m.distribution.totalMass;
  out.nodes = c.graph.nodeCount();
  out.roots = c.graph.rootCount();
  out.report = std::move(m.report);
  return out;
}

// Largest absolute difference over the union of supports.
inline double maxDiff(const TextDist& a, const TextDist& b) {
  double worst = 0.0;
  for (const auto& [k, p] : a) {
    auto it = b.find(k);
    worst = std::max(worst, std::abs(p - (it == b.end() ? 0.0 : it->second)));
  }
  for (const auto& [k, p] : b)
    if (!a.contains(k)) worst = std::max(worst, std::abs(p));
  return worst;
}

inline std::string readModel(const std::string& name) {
  std::ifstream in(std::string(DPM_MODELS_DIR) + "/" + name, std::ios::binary);
  if (!in) throw std::runtime_error("missing model " + name);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

// Next generated query whose condition holds with probability at least
// `minAcceptance`, judged by the enumeration oracle.
inline std::string acceptedQuery(QueryGenerator& gen, int flips, double minAcceptance = 1.0 / 64) {
  for (;;) {
    auto g = gen.next(flips);
    auto cond = enumerateProgram(g.condition);
    if (cond.dist["#t"] >= minAcceptance) return g.program;
  }
}

}  // namespace dpm::testing
