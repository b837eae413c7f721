#pragma once

#include <map>
#include <string>
#include <string_view>

namespace dpm::testing {

// Exact marginal by exhaustive weighted enumeration, written independently of
// the interpreter/compiler/solver pipeline. It evaluates s-expressions
// directly in the distribution monad, handles `query` by enumerating the
// joint and renormalizing, and truncates procedure calls nested deeper than
// `fuel`. Truncated paths are dropped, so `mass` is a lower bound on the
// halting mass and 1 - mass bounds the truncation error.
struct Enumeration {
  std::map<std::string, double> dist;  // canonical value text -> probability
  double mass = 0.0;
};

Enumeration enumerateProgram(std::string_view text, int fuel = 64);

}  // namespace dpm::testing
