#include <algorithm>
#include <map>
#include <random>
#include <set>

#include "doctest.h"
#include "dpm/compile.hpp"
#include "dpm/driver.hpp"
#include "dpm/error.hpp"
#include "dpm/solve.hpp"
#include "harness.hpp"

using namespace dpm;
using namespace dpm::testing;

namespace {

const std::vector<std::string> kModels = {
    "fig1a-game.church",   "fig1b-rejection.church",         "fig1b-query.church",
    "fig3-rope-pulling-team1.church", "fig3-rope-pulling-team2.church", "least-fixed-point.church",
    "fig5-scalar-implicature.church"};

// Random value tree, kept alongside its interned id.
struct Shape {
  int kind;  // 0 bool, 1 number, 2 symbol, 3 string, 4 nil, 5 pair, 6 closure, 7 primitive
  int atom = 0;
  std::vector<Shape> kids;
  friend bool operator==(const Shape&, const Shape&) = default;
  friend auto operator<=>(const Shape& a, const Shape& b) {
    if (auto c = a.kind <=> b.kind; c != 0) return c;
    if (auto c = a.atom <=> b.atom; c != 0) return c;
    return std::lexicographical_compare_three_way(a.kids.begin(), a.kids.end(), b.kids.begin(), b.kids.end());
  }
};

Shape randomShape(std::mt19937& rng, int depth) {
  std::uniform_int_distribution<int> kind(0, 7);
  Shape s{depth > 0 && rng() % 2 ? 5 : kind(rng)};
  if (depth == 0 && s.kind == 5) s.kind = 4;
  switch (s.kind) {
    case 0: s.atom = int(rng() % 2); break;
    case 1: s.atom = int(rng() % 7) - 3; break;
    case 2:
    case 3: s.atom = int(rng() % 4); break;
    case 5:
      s.kids.push_back(randomShape(rng, depth - 1));
      s.kids.push_back(randomShape(rng, depth - 1));
      break;
    case 6: s.atom = int(rng() % 3); break;
    case 7: s.atom = int(rng() % 5); break;
    default: break;
  }
  return s;
}

ValueId internShape(Store& store, const std::vector<ExprId>& lambdas, const Shape& s) {
  switch (s.kind) {
    case 0: return store.boolean(s.atom != 0);
    case 1: return store.number(Rational(s.atom, 2));
    case 2: return store.symbolValue("s" + std::to_string(s.atom));
    case 3: return store.string("t" + std::to_string(s.atom));
    case 4: return store.nil();
    case 5: return store.cons(internShape(store, lambdas, s.kids[0]), internShape(store, lambdas, s.kids[1]));
    case 6: {
      EnvId env = store.extend(store.emptyEnv(), store.symbol("k"), store.number(s.atom));
      return store.closure(lambdas[s.atom], env);
    }
    default: return store.primitive(static_cast<Primitive>(s.atom));
  }
}

// Reads the structure back out of the store.
Shape readBack(const Store& store, const std::vector<ExprId>& lambdas, ValueId v) {
  const ValueNode& n = store.node(v);
  switch (n.kind) {
    case ValueKind::Boolean: return {0, store.isTrue(v) ? 1 : 0};
    case ValueKind::Number: return {1, int(store.numberOf(v) * 2)};
    case ValueKind::Symbol: return {2, store.symbolName(store.symbolOf(v))[1] - '0'};
    case ValueKind::String: return {3, store.stringOf(v)[1] - '0'};
    case ValueKind::Nil: return {4};
    case ValueKind::Pair:
      return {5, 0, {readBack(store, lambdas, store.car(v)), readBack(store, lambdas, store.cdr(v))}};
    case ValueKind::Closure:
      return {6, int(std::find(lambdas.begin(), lambdas.end(), ExprId(n.a)) - lambdas.begin())};
    case ValueKind::Primitive: return {7, int(n.a)};
    default: return {-1};
  }
}

std::vector<std::string> propertyCorpus() {
  std::vector<std::string> out;
  for (const auto& m : kModels) out.push_back(readModel(m));
  QueryGenerator gen(99);
  for (int i = 0; i < 20; ++i) out.push_back(acceptedQuery(gen, 2 + i % 5));
  for (int d = 0; d <= 5; ++d) out.push_back(implicatureProgram(d));
  out.push_back("(define (diverge) (diverge)) (if (flip 0.3) 1 (diverge))");
  out.push_back("(query (define a (flip 0.5)) a false)");
  return out;
}

}  // namespace

TEST_SUITE("properties") {
  TEST_CASE("interning is sound and injective on random values") {
    Store store;
    std::vector<ExprId> lambdas = {parseExpression(store, "(lambda (x) k)"),
                                   parseExpression(store, "(lambda (x y) (+ x k))"),
                                   parseExpression(store, "(lambda () (flip k))")};
    std::mt19937 rng(2024);
    std::map<Shape, ValueId> byShape;
    std::map<ValueId, Shape> byId;
    for (int i = 0; i < 10000; ++i) {
      Shape s = randomShape(rng, int(rng() % 7));
      ValueId id = internShape(store, lambdas, s);
      CHECK(readBack(store, lambdas, id) == s);
      auto [it, fresh] = byShape.emplace(s, id);
      if (!fresh) CHECK(it->second == id);
      auto [jt, freshId] = byId.emplace(id, s);
      if (!freshId) CHECK(jt->second == s);
    }
    CHECK(byShape.size() == byId.size());
    CHECK(byShape.size() > 1000);
  }

  TEST_CASE("free variables of closed programs are primitive names") {
    for (const auto& text : propertyCorpus()) {
      Store store;
      Program p = parse(store, text);
      for (SymbolId s : store.freeVariables(p.entry)) CHECK(primitiveByName(store.symbolName(s)).has_value());
    }
  }

  TEST_CASE("fixed-point iterates are monotone on every component") {
    for (const auto& text : propertyCorpus()) {
      Store store;
      Compilation c = buildFspn(store, parse(store, text));
      MarginalOptions options;
      options.solver.simplify = false;
      Marginal m = marginal(c, options);
      for (const auto& comp : m.report.components) {
        CHECK(comp.monotone);
        CHECK(comp.converged);
      }
    }
  }

  TEST_CASE("total mass is bounded") {
    for (const auto& text : propertyCorpus()) {
      for (SolverKind kind : {SolverKind::Fixpoint, SolverKind::Newton}) {
        Solved s = solveText(text, kind);
        CHECK(s.mass >= 0.0);
        CHECK(s.mass <= 1.0 + 1e-9);
      }
    }
    QueryGenerator gen(5);
    for (int i = 0; i < 30; ++i) CHECK(std::abs(solveText(acceptedQuery(gen, 2 + i % 5)).mass - 1.0) < 1e-9);
  }

  TEST_CASE("reference-free networks sum to one") {
    for (const char* text : {"(flip 0.6)", "(if (flip 0.3) (flip 0.2) (uniform-draw '(a b c)))",
                             "(list (flip) (multinomial '(x y) '(1 3)))"}) {
      Store store;
      Compilation c = buildFspn(store, parse(store, text));
      REQUIRE(c.graph.rootCount() == 1);
      double total = 0.0;
      for (ValueId v : c.state.terminals.at(c.graph.globalRoot()).values())
        total += evaluate(c.graph, c.graph.globalRoot(), v, {});
      CHECK(std::abs(total - 1.0) < 1e-9);
    }
  }

  TEST_CASE("marginals agree with the enumeration oracle") {
    for (const auto& text : propertyCorpus()) {
      Enumeration e;
      try {
        e = enumerateProgram(text, 200);
      } catch (const std::runtime_error&) {
        continue;  // zero-probability condition; the oracle refuses it
      }
      Solved s = solveText(text);
      CHECK(maxDiff(e.dist, s.dist) < std::max(1e-9, 1.0 - e.mass));
    }
  }

  TEST_CASE("dot output is deterministic") {
    for (const auto& text : propertyCorpus()) {
      Store a, b;
      std::string first = emitDot(buildFspn(a, parse(a, text)).graph, a);
      std::string second = emitDot(buildFspn(b, parse(b, text)).graph, b);
      CHECK(first == second);
    }
  }

  TEST_CASE("replaying a yield trace reproduces it") {
    Store store;
    Interpreter in(store);
    Program p = parse(store, readModel("fig3-rope-pulling-team1.church"));
    std::mt19937 rng(1);
    for (int run = 0; run < 20; ++run) {
      // Walk one random path, recording yields, then replay the same choices.
      std::vector<std::size_t> choices;
      auto walk = [&](bool replay) {
        std::vector<std::string> trace;
        std::vector<std::pair<Continuation, InterpreterArg>> stack;
        PartialResult r = in.interpret(in.entry(p.entry));
        std::size_t step = 0;
        for (int guard = 0; guard < 10000; ++guard) {
          if (auto* t = std::get_if<Terminal>(&r)) {
            trace.push_back("T" + store.show(t->value));
            if (stack.empty()) break;
            Continuation k = stack.back().first;
            stack.pop_back();
            r = in.resume(k, t->value);
          } else if (auto* c = std::get_if<RandomChoice>(&r)) {
            std::size_t i = replay ? choices.at(step) : rng() % c->values.size();
            if (!replay) choices.push_back(i);
            ++step;
            trace.push_back("C" + std::to_string(i));
            r = in.resume(c->k, c->values[i]);
          } else {
            auto& call = std::get<Subcall>(r);
            trace.push_back("S" + std::to_string(call.arg.expression.index) + "/" +
                            std::to_string(call.arg.environment.index));
            stack.emplace_back(call.k, call.arg);
            r = in.interpret(call.arg);
          }
        }
        return trace;
      };
      auto first = walk(false);
      auto second = walk(true);
      CHECK(first == second);
    }
  }
}
