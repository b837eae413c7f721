#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "dpm/driver.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Exact marginal inference for discrete recursive probabilistic programs"};
  dpm::RunConfig config;

  std::string solver = "fixpoint";
  std::string emit = "none";
  std::string depths;

  app.add_option("input", config.inputPath, "Program file");
  app.add_option("--solver", solver, "Component solver")->check(CLI::IsMember({"fixpoint", "newton"}));
  app.add_option("--tol", config.tol, "Convergence tolerance")->check(CLI::PositiveNumber);
  app.add_option("--max-iter", config.maxIter, "Iteration cap per component")->check(CLI::PositiveNumber);
  app.add_option("--task-budget", config.taskBudget, "Maximum compilation tasks")->check(CLI::PositiveNumber);
  app.add_option("--node-budget", config.nodeBudget, "Maximum network nodes")->check(CLI::PositiveNumber);
  app.add_flag("--normalize", config.normalize, "Divide by the total mass");
  app.add_option("--emit", emit, "Write the network as dot or fspn-json")
      ->check(CLI::IsMember({"none", "dot", "fspn-json"}));
  app.add_option("--emit-path", config.emitPath, "Destination for --emit (default: next to the input)");
  app.add_flag("--stats", config.stats, "Include network and solver statistics");
  app.add_option("--bench-depths", depths, "Run the nested-query benchmark at depths d1,d2,...");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? dpm::kExitOk : dpm::kExitProgramError;
  }

  config.solver = solver == "newton" ? dpm::SolverKind::Newton : dpm::SolverKind::Fixpoint;
  config.emit = emit == "dot" ? dpm::EmitKind::Dot : emit == "fspn-json" ? dpm::EmitKind::FspnJson : dpm::EmitKind::None;

  if (!depths.empty()) {
    std::stringstream in(depths);
    std::string item;
    while (std::getline(in, item, ',')) {
      try {
        config.benchDepths.push_back(std::stoi(item));
      } catch (const std::exception&) {
        std::cerr << "invalid depth: " << item << "\n";
        return dpm::kExitProgramError;
      }
    }
  } else if (config.inputPath.empty()) {
    std::cerr << app.help();
    return dpm::kExitProgramError;
  }
  return dpm::run(config, std::cout);
}
