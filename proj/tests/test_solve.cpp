#include <cmath>
#include <limits>
#include <random>
#include <set>

#include "doctest.h"
#include "dpm/compile.hpp"
#include "dpm/error.hpp"
#include "dpm/solve.hpp"
#include "harness.hpp"

using namespace dpm;

namespace {

Monomial mono(double c, std::vector<std::uint32_t> f = {}) { return {c, std::move(f)}; }

EquationSystem systemOf(std::vector<Polynomial> rhs) {
  EquationSystem sys;
  for (std::uint32_t i = 0; i < rhs.size(); ++i) {
    sys.variables.push_back({NodeId(i), ValueId(0)});
    sys.index[{NodeId(i), ValueId(0)}] = i;
  }
  sys.rhs = std::move(rhs);
  return sys;
}

ComponentResult solveAlone(const EquationSystem& sys, SolverKind kind, bool simplify = true) {
  Component all;
  for (std::uint32_t i = 0; i < sys.variables.size(); ++i) all.push_back(i);
  std::vector<double> none(sys.variables.size(), std::numeric_limits<double>::quiet_NaN());
  SolverOptions options;
  options.solver = kind;
  options.simplify = simplify;
  return solveComponent(all, sys, none, options);
}

const double kLeast = 2.0 - std::sqrt(3.0);

}  // namespace

TEST_SUITE("solve") {
  TEST_CASE("flip equations are constants") {
    Store store;
    Compilation c = buildFspn(store, parse(store, "(flip 0.6)"));
    EquationSystem sys = extractEquations(c.graph, c.state.terminals);
    REQUIRE(sys.variables.size() == 2);
    auto t = sys.find(c.graph.globalRoot(), store.boolean(true));
    REQUIRE(t);
    REQUIRE(sys.rhs[*t].size() == 1);
    CHECK(sys.rhs[*t][0].factors.empty());
    CHECK(sys.rhs[*t][0].coefficient == doctest::Approx(0.6));
  }

  TEST_CASE("game equations") {
    Store store;
    Compilation c = buildFspn(store, parse(store, dpm::testing::readModel("fig1a-game.church")));
    EquationSystem sys = extractEquations(c.graph, c.state.terminals);
    NodeId gt, gf;
    for (const auto& [root, arg] : c.state.subproblemOf) {
      auto player = store.lookup(arg.environment, store.symbol("player"));
      REQUIRE(player);
      (*player == store.boolean(true) ? gt : gf) = root;
    }
    ValueId T = store.boolean(true), F = store.boolean(false);
    auto var = [&](NodeId r, ValueId v) { return *sys.find(r, v); };
    // Each right-hand side is affine in exactly the expected variable.
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<double> x(sys.variables.size());
      for (double& xi : x) xi = unit(rng);
      CHECK(evaluatePolynomial(sys.rhs[var(gt, T)], x) == doctest::Approx(0.08 + 0.6 * x[var(gf, F)]));
      CHECK(evaluatePolynomial(sys.rhs[var(gt, F)], x) == doctest::Approx(0.32 + 0.6 * x[var(gf, T)]));
      CHECK(evaluatePolynomial(sys.rhs[var(gf, T)], x) == doctest::Approx(0.28 + 0.6 * x[var(gt, F)]));
      CHECK(evaluatePolynomial(sys.rhs[var(gf, F)], x) == doctest::Approx(0.12 + 0.6 * x[var(gt, T)]));
    }

    // m[gt,#t] pairs with m[gf,#f] and m[gt,#f] with m[gf,#t]: two 2-cycles,
    // then the global root's variables.
    auto comps = sccDecompose(sys);
    REQUIRE(comps.size() == 4);
    std::set<std::set<std::uint32_t>> found;
    std::set<std::uint32_t> done;
    for (const Component& comp : comps) {
      found.emplace(comp.begin(), comp.end());
      std::set<std::uint32_t> members(comp.begin(), comp.end());
      for (auto i : comp)
        for (const Monomial& m : sys.rhs[i])
          for (auto f : m.factors) CHECK((members.contains(f) || done.contains(f)));
      done.insert(comp.begin(), comp.end());
    }
    ValueId T0 = store.boolean(true), F0 = store.boolean(false);
    NodeId g = c.graph.globalRoot();
    CHECK(found == std::set<std::set<std::uint32_t>>{{var(gt, T0), var(gf, F0)},
                                                     {var(gt, F0), var(gf, T0)},
                                                     {var(g, T0)},
                                                     {var(g, F0)}});

    Marginal m = marginal(c);
    CHECK(std::abs(m.report.assignment[var(gt, T)] - 0.2375) < 1e-9);
    CHECK(std::abs(m.report.assignment[var(gf, T)] - 0.7375) < 1e-9);
    CHECK(std::abs(m.distribution.probability(T) - 0.2375) < 1e-9);
    CHECK(std::abs(m.distribution.probability(F) - 0.7625) < 1e-9);
  }

  TEST_CASE("rejection loop is a self-referencing equation") {
    Store store;
    Compilation c = buildFspn(store, parse(store, "(query (define a (flip 0.5)) a a)"));
    EquationSystem sys = extractEquations(c.graph, c.state.terminals);
    int selfLoops = 0;
    for (std::uint32_t i = 0; i < sys.variables.size(); ++i) {
      bool self = false;
      for (const Monomial& m : sys.rhs[i])
        for (auto f : m.factors) self = self || f == i;
      if (!self) continue;
      ++selfLoops;
      std::vector<double> x(sys.variables.size(), 0.0);
      for (double v : {0.0, 0.3, 1.0}) {
        x[i] = v;
        CHECK(evaluatePolynomial(sys.rhs[i], x) == doctest::Approx(0.5 + 0.5 * v));
      }
    }
    CHECK(selfLoops == 1);
  }

  TEST_CASE("scc order") {
    // a = 0 + b, b = a, c = a
    EquationSystem sys = systemOf({{mono(0.5, {1})}, {mono(0.5, {0})}, {mono(1.0, {0})}});
    auto comps = sccDecompose(sys);
    REQUIRE(comps.size() == 2);
    std::sort(comps[0].begin(), comps[0].end());
    CHECK(comps[0] == Component{0, 1});
    CHECK(comps[1] == Component{2});

    EquationSystem constants = systemOf({{mono(0.1)}, {mono(0.2)}, {mono(0.3)}});
    CHECK(sccDecompose(constants).size() == 3);
  }

  TEST_CASE("linear self loop") {
    EquationSystem sys = systemOf({{mono(0.5), mono(0.5, {0})}});
    auto direct = solveAlone(sys, SolverKind::Fixpoint);
    CHECK(direct.method == SolveMethod::Direct);
    CHECK(direct.values[0] == doctest::Approx(1.0).epsilon(1e-15));
    auto iterated = solveAlone(sys, SolverKind::Fixpoint, false);
    CHECK(iterated.method == SolveMethod::Fixpoint);
    CHECK(std::abs(iterated.values[0] - 1.0) < 1e-9);
    CHECK(iterated.monotone);
  }

  TEST_CASE("least fixed point") {
    EquationSystem sys = systemOf({{mono(0.25), mono(0.25, {0, 0})}});
    auto fp = solveAlone(sys, SolverKind::Fixpoint);
    CHECK(fp.method == SolveMethod::Fixpoint);
    CHECK(std::abs(fp.values[0] - kLeast) < 1e-10);
    CHECK(fp.monotone);
    auto nt = solveAlone(sys, SolverKind::Newton);
    CHECK(nt.method == SolveMethod::Newton);
    CHECK(std::abs(nt.values[0] - kLeast) < 1e-10);
  }

  TEST_CASE("coupled nonlinear system agrees across solvers") {
    // x = 0.2 + 0.3 x y, y = 0.1 + 0.5 x^2 + 0.2 y
    EquationSystem sys = systemOf({{mono(0.2), mono(0.3, {0, 1})}, {mono(0.1), mono(0.5, {0, 0}), mono(0.2, {1})}});
    auto fp = solveAlone(sys, SolverKind::Fixpoint);
    auto nt = solveAlone(sys, SolverKind::Newton);
    for (int i = 0; i < 2; ++i) CHECK(std::abs(fp.values[i] - nt.values[i]) < 1e-9);
    std::vector<double> x = nt.values;
    CHECK(std::abs(evaluatePolynomial(sys.rhs[0], x) - x[0]) < 1e-12);
    CHECK(std::abs(evaluatePolynomial(sys.rhs[1], x) - x[1]) < 1e-12);
  }

  TEST_CASE("newton falls back on a singular jacobian") {
    // x = x: I - J vanishes everywhere; the least solution is 0.
    EquationSystem sys = systemOf({{mono(1.0, {0})}});
    auto r = solveAlone(sys, SolverKind::Newton, false);
    CHECK(r.converged);
    CHECK(r.values[0] == 0.0);
  }

  TEST_CASE("topological contract") {
    EquationSystem sys = systemOf({{mono(0.5, {1})}, {mono(0.5)}});
    std::vector<double> unsolved(2, std::numeric_limits<double>::quiet_NaN());
    CHECK_THROWS_AS(solveComponent({0}, sys, unsolved, {}), std::logic_error);
    std::vector<double> solved = {std::numeric_limits<double>::quiet_NaN(), 0.5};
    CHECK(solveComponent({0}, sys, solved, {}).values[0] == doctest::Approx(0.25));
  }

  TEST_CASE("no convergence") {
    // x = 0.5 + x^2 has no real solution; iterates pass 1.
    EquationSystem sys = systemOf({{mono(0.5), mono(1.0, {0, 0})}});
    CHECK_FALSE(solveAlone(sys, SolverKind::Fixpoint).converged);
    CHECK_THROWS_AS(solveSystem(sys, {}), NoConvergence);
    SolverOptions newton;
    newton.solver = SolverKind::Newton;
    CHECK_THROWS_AS(solveSystem(sys, newton), NoConvergence);
    EquationSystem linear = systemOf({{mono(0.6), mono(0.6, {0})}});
    CHECK_THROWS_AS(solveSystem(linear, {}), NoConvergence);
    SolverOptions capped;
    capped.maxIter = 3;
    EquationSystem slow = systemOf({{mono(0.5), mono(0.5, {0, 0})}});
    CHECK_THROWS_AS(solveSystem(slow, capped), NoConvergence);
  }

  TEST_CASE("zero mass") {
    Store store;
    Compilation c = buildFspn(store, parse(store, "(query (define a (flip 0.5)) a false)"));
    Marginal m = marginal(c);
    CHECK(m.distribution.totalMass == 0.0);
    CHECK(m.distribution.mass.empty());
    MarginalOptions normalize;
    normalize.normalize = true;
    CHECK_THROWS_AS(marginal(c, normalize), ZeroMass);
  }

  TEST_CASE("normalization") {
    Store store;
    Compilation c = buildFspn(store, parse(store, dpm::testing::readModel("least-fixed-point.church")));
    MarginalOptions normalize;
    normalize.normalize = true;
    Marginal m = marginal(c, normalize);
    CHECK(m.distribution.totalMass == 1.0);
    CHECK(m.distribution.probability(store.boolean(true)) == doctest::Approx(1.0));
  }

  TEST_CASE("report json") {
    EquationSystem sys = systemOf({{mono(0.25), mono(0.25, {0, 0})}, {mono(0.5, {0})}});
    auto j = toJson(solveSystem(sys, {}));
    REQUIRE(j.size() == 2);
    CHECK(j[0]["method"] == "fixpoint");
    CHECK(j[1]["method"] == "direct");
    CHECK(j[0]["size"] == 1);
    CHECK(j[0]["converged"] == true);
  }
}
