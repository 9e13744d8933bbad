#pragma once

// Run configurations for the command-line runner. The on-disk form is a
// YAML mapping; README.md documents every key and its default.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "twistk/perturbation.hpp"

namespace twistk {

enum class ScenarioKind { single_solve, ladder_study, continuity_sweep, threshold, twist_perturbation, verify_suite };

const char* to_string(ScenarioKind kind);
std::optional<ScenarioKind> scenario_from_string(const std::string& name);

/// amplitude * cos(k . x + phase) with k one integer per real axis (x1, y1, x2, y2).
struct PotentialTerm {
  double amplitude = 0.0;
  std::vector<int> wavenumber;
  double phase = 0.0;

  bool operator==(const PotentialTerm&) const = default;
};

/// Closed (1,1)-form: constant Hermitian matrix plus i ddbar of a trigonometric potential.
struct FormSpec {
  HMatrix constant;
  std::vector<PotentialTerm> potential;

  bool operator==(const FormSpec& other) const;
};

struct SolverSettings {
  double newton_tolerance = 1e-9;
  int max_newton_iterations = 40;
  double krylov_tolerance = 1e-10;
  double linear_tolerance = 1e-4;
  bool dealias = false;
  bool eigenvalues = true;

  bool operator==(const SolverSettings&) const = default;
};

struct ThresholdSettings {
  double R_start = 50.0;
  double R_min = 1e-2;
  double factor = 0.5;
  double bisection_tolerance = 1e-3;

  bool operator==(const ThresholdSettings&) const = default;
};

struct PerturbationSettings {
  /// alpha_new = alpha + i ddbar(sum of terms).
  std::vector<PotentialTerm> potential;
  int steps = 1;

  bool operator==(const PerturbationSettings&) const = default;
};

struct RunConfig {
  ScenarioKind scenario = ScenarioKind::single_solve;
  int n = 1;
  std::vector<int> grid;
  FormSpec omega;
  /// Empty means alpha is the form of omega itself.
  std::optional<FormSpec> alpha;
  std::vector<double> R;
  std::vector<double> t;
  std::vector<int> orders;
  int ladder_order = 2;
  SolverSettings solver;
  ThresholdSettings threshold;
  PerturbationSettings perturbation;
  std::string output = "out";
  std::uint64_t seed = 1;
  int threads = 1;

  bool operator==(const RunConfig& other) const;
};

struct Diagnostic {
  /// 1-based position in the source text; 0 when the key is absent.
  int line;
  int column;
  /// Dotted key path, e.g. "solver.newton_tolerance".
  std::string path;
  std::string message;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(std::vector<Diagnostic> diagnostics);
  const std::vector<Diagnostic>& diagnostics() const noexcept { return diagnostics_; }

 private:
  std::vector<Diagnostic> diagnostics_;
};

/// Defaults for a scenario: flat unit metric, alpha = omega, 32^2 grid (8^4 for n = 2).
RunConfig default_config(ScenarioKind kind, int n = 1);

/// Parses and validates; throws ConfigError with every diagnostic found.
/// With `expected`, a missing scenario key defaults to it and a different one is an error.
RunConfig parse_config(const std::string& text, std::optional<ScenarioKind> expected = std::nullopt);

/// Re-checks the invariants after programmatic edits (CLI overrides).
void validate_config(const RunConfig& cfg);

/// Canonical YAML with every key explicit; parse_config(emit_config(c)) == c.
std::string emit_config(const RunConfig& cfg);

PeriodicGrid make_grid(const RunConfig& cfg);
ScalarField potential_field(const PeriodicGrid& grid, const std::vector<PotentialTerm>& terms);
HermitianFormField make_form(const PeriodicGrid& grid, const FormSpec& spec);
SolverConfig solver_config(const RunConfig& cfg);

}  // namespace twistk
