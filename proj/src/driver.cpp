#include "dpm/driver.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <ostream>
#include <sstream>

namespace dpm {

namespace {

using Clock = std::chrono::steady_clock;

double secondsSince(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

nlohmann::ordered_json errorObject(const char* kind, const std::string& message) {
  nlohmann::ordered_json j;
  j["error"] = kind;
  j["message"] = message;
  return j;
}

int exitCodeFor(const Error& e) {
  if (dynamic_cast<const BudgetExceeded*>(&e)) return kExitBudget;
  if (dynamic_cast<const NoConvergence*>(&e)) return kExitNoConvergence;
  if (dynamic_cast<const ZeroMass*>(&e)) return kExitZeroMass;
  return kExitProgramError;
}

CompileLimits limitsOf(const RunConfig& config) {
  CompileLimits limits;
  limits.taskBudget = config.taskBudget;
  limits.nodeBudget = config.nodeBudget;
  return limits;
}

MarginalOptions marginalOptionsOf(const RunConfig& config) {
  MarginalOptions options;
  options.solver.solver = config.solver;
  options.solver.tol = config.tol;
  options.solver.maxIter = config.maxIter;
  options.normalize = config.normalize;
  return options;
}

nlohmann::ordered_json distributionJson(const Store& store, const Distribution& dist) {
  std::vector<std::pair<std::string, double>> rows;
  rows.reserve(dist.mass.size());
  for (const auto& [value, p] : dist.mass) rows.emplace_back(store.show(value), p);
  std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  nlohmann::ordered_json out = nlohmann::ordered_json::array();
  for (const auto& [text, p] : rows) {
    nlohmann::ordered_json row;
    row["value"] = text;
    row["prob"] = p;
    out.push_back(std::move(row));
  }
  return out;
}

}  // namespace

RunResult runSource(std::string_view source, const RunConfig& config) {
  RunResult result;
  try {
    Store store;
    auto t0 = Clock::now();
    Program program = parse(store, source);
    double parseSeconds = secondsSince(t0);

    auto t1 = Clock::now();
    Compilation c = buildFspn(store, program, limitsOf(config));
    double compileSeconds = secondsSince(t1);

    if (config.emit == EmitKind::Dot) result.emitted = emitDot(c.graph, store);
    if (config.emit == EmitKind::FspnJson) result.emitted = emitJson(c.graph, store);

    auto t2 = Clock::now();
    Marginal m = marginal(c, marginalOptionsOf(config));
    double solveSeconds = secondsSince(t2);

    nlohmann::ordered_json& out = result.output;
    out["distribution"] = distributionJson(store, m.distribution);
    out["totalMass"] = m.distribution.totalMass;
    if (config.stats) {
      nlohmann::ordered_json stats;
      stats["nodes"] = c.graph.nodeCount();
      stats["edges"] = c.graph.edgeCount();
      stats["roots"] = c.graph.rootCount();
      stats["tasks"] = c.state.tasksRun;
      stats["variables"] = m.system.variables.size();
      stats["monomials"] = m.system.monomialCount();
      stats["sccCount"] = m.report.components.size();
      nlohmann::ordered_json sizes = nlohmann::ordered_json::array();
      for (const auto& comp : m.report.components) sizes.push_back(comp.variables.size());
      stats["sccSizes"] = std::move(sizes);
      stats["components"] = toJson(m.report);
      stats["seconds"] = {{"parse", parseSeconds}, {"compile", compileSeconds}, {"solve", solveSeconds}};
      out["stats"] = std::move(stats);
    }
  } catch (const Error& e) {
    result.exitCode = exitCodeFor(e);
    result.output = errorObject(e.kind(), e.what());
  }
  return result;
}

std::string implicatureProgram(int depth) {
  std::string text = R"(;; Scalar implicature: a listener reasons about a speaker who reasons about
;; a listener, down to a literal listener at depth 0.
(define states '(none some all))
(define (state-prior) (uniform-draw states))

(define (none-sentence state) (eq? state 'none))
(define (some-sentence state) (not (eq? state 'none)))
(define (all-sentence state) (eq? state 'all))
(define (sentence-prior) (uniform-draw (list none-sentence some-sentence all-sentence)))

;; Full access sees the state. Partial access only sees whether any object
;; complies, so it cannot tell some from all.
(define (belief state access)
  (if (eq? access 'full)
      state
      (if (eq? state 'none) '(none) '(some all))))

(define (speaker access state depth)
  (query
   (define sentence (sentence-prior))
   sentence
   (equal? (belief state access)
           (listener access sentence depth))))

(define (listener sp-access sentence depth)
  (query
   (define state (state-prior))
   (belief state sp-access)
   (if (= 0 depth)
       (sentence state)
       (equal? sentence
               (speaker sp-access state (- depth 1))))))

)";
  text += "(listener 'full some-sentence " + std::to_string(depth) + ")\n";
  return text;
}

RunResult bench(const std::vector<int>& depths, const RunConfig& config) {
  RunResult result;
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  try {
    for (int depth : depths) {
      if (depth < 0) throw RuntimeError("bench depth must be non-negative");
      Store store;
      Program program = parse(store, implicatureProgram(depth));
      auto t0 = Clock::now();
      Compilation c = buildFspn(store, program, limitsOf(config));
      double compileSeconds = secondsSince(t0);
      auto t1 = Clock::now();
      Marginal m = marginal(c, marginalOptionsOf(config));
      double solveSeconds = secondsSince(t1);
      nlohmann::ordered_json row;
      row["depth"] = depth;
      row["nodes"] = c.graph.nodeCount();
      row["edges"] = c.graph.edgeCount();
      row["roots"] = c.graph.rootCount();
      row["variables"] = m.system.variables.size();
      row["totalMass"] = m.distribution.totalMass;
      row["compileSeconds"] = compileSeconds;
      row["solveSeconds"] = solveSeconds;
      rows.push_back(std::move(row));
    }
    result.output["bench"] = std::move(rows);
  } catch (const Error& e) {
    result.exitCode = exitCodeFor(e);
    result.output = errorObject(e.kind(), e.what());
  }
  return result;
}

int run(const RunConfig& config, std::ostream& out) {
  RunResult result;
  if (!config.benchDepths.empty()) {
    result = bench(config.benchDepths, config);
  } else {
    std::ifstream in(config.inputPath, std::ios::binary);
    if (!in) {
      out << errorObject("IOError", "cannot read " + config.inputPath).dump() << "\n";
      return kExitProgramError;
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    result = runSource(buffer.str(), config);
    if (config.emit != EmitKind::None && !result.emitted.empty()) {
      std::string path = config.emitPath;
      if (path.empty()) path = config.inputPath + (config.emit == EmitKind::Dot ? ".dot" : ".fspn.json");
      std::ofstream file(path, std::ios::binary);
      if (!file) {
        out << errorObject("IOError", "cannot write " + path).dump() << "\n";
        return kExitProgramError;
      }
      file << result.emitted;
    }
  }
  out << result.output.dump() << "\n";
  return result.exitCode;
}

}  // namespace dpm
