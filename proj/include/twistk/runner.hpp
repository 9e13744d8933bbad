#pragma once

// Executes a RunConfig and writes its artifacts:
//   manifest.yaml  canonical config, seed, library versions
//   steps.csv      one row per nonlinear solve (solve, sweep, threshold, perturb)
//   ladder.csv     ladder_study only
//   twist.csv      twist_perturbation only
//   verify.csv     verify_suite only
//   fields/*.bin   final potentials and metric components of converged solves
//   summary.yaml   verdicts, recomputable from the CSV files

#include <filesystem>
#include <string>
#include <vector>

#include "twistk/config.hpp"

namespace twistk {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr const char* kStepsHeader = "step,t,R,residual_sup,residual_l2,lambda1,newton_iters,wall_ms";

struct RunOutcome {
  /// 0: every requested solve converged (or every check passed); 1: some
  /// did not; 2: the scenario could not be set up.
  int exit_code;
  std::filesystem::path directory;
  std::string message;
};

RunOutcome run_scenario(const RunConfig& cfg);

struct VerifyCheck {
  std::string name;
  double value;
  /// Passes when value <= bound.
  double bound;
  bool pass;
};

/// Oracle cross-checks at the configuration's complex dimension; seeded by cfg.seed.
std::vector<VerifyCheck> verify_checks(const RunConfig& cfg);

}  // namespace twistk
