#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "dpm/solve.hpp"
#include "json.hpp"

namespace dpm {

enum class EmitKind : std::uint8_t { None, Dot, FspnJson };

struct RunConfig {
  std::string inputPath;
  SolverKind solver = SolverKind::Fixpoint;
  double tol = 1e-10;
  std::size_t maxIter = 1'000'000;
  std::uint64_t taskBudget = 10'000'000;
  std::uint64_t nodeBudget = 10'000'000;
  bool normalize = false;
  EmitKind emit = EmitKind::None;
  std::string emitPath;  // empty: next to the input (<input>.dot / <input>.fspn.json)
  bool stats = false;
  std::vector<int> benchDepths;
};

enum ExitCode : int {
  kExitOk = 0,
  kExitProgramError = 1,
  kExitBudget = 2,
  kExitNoConvergence = 3,
  kExitZeroMass = 4,
};

struct RunResult {
  int exitCode = kExitOk;
  nlohmann::ordered_json output;  // success document or {"error", "message"}
  std::string emitted;            // DOT or FSPN JSON text when requested
};

// Marginalizes program text; never throws for program-level failures.
RunResult runSource(std::string_view source, const RunConfig& config);

// Reads config.inputPath (or runs the bench), prints one JSON document on
// `out`, writes any emitted artifact, and returns the exit code.
int run(const RunConfig& config, std::ostream& out);

// Nested-query scalar implicature model with the given reasoning depth.
std::string implicatureProgram(int depth);

RunResult bench(const std::vector<int>& depths, const RunConfig& config);

}  // namespace dpm
