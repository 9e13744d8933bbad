#pragma once

// Nonlinear solves for the twisted equation S(omega_phi) - R Lambda_{omega_phi} alpha = const:
// the trivial twist, the approximate-solution ladder, damped Newton, the
// inverse-function-theorem certificate, twist perturbation, the continuity
// sweep and the threshold search.
//
// Potentials passed to and returned from the Newton layer are absolute:
// the metric is g0 + ddbar(potential).

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "twistk/krylov.hpp"

namespace twistk {

struct SolverConfig {
  double newton_tolerance = 1e-9;
  int max_newton_iterations = 40;
  /// Line search gives up below this step length.
  double damping_floor = 0x1p-20;
  /// Linear solves of the ladder, Green's function and eigen/inverse-norm estimates.
  KrylovConfig krylov{};
  /// GMRES settings for the Newton corrections; the tolerance is the upper
  /// bound of the forcing term.
  KrylovConfig newton_linear{1e-4, 3000, PreconditionerKind::flat_bilaplacian_shift, 60};
  /// Galerkin 2/3-rule truncation of Newton updates and residuals.
  bool dealias = false;
  EigenConfig eigen{};

  void validate() const;
};

struct TwistedResidual {
  /// S - R Lambda alpha - constant.
  ScalarField residual;
  /// S-bar - R c from the cohomology classes (omega-volume mean when alpha is not closed).
  double constant;
};

TwistedResidual twisted_residual(const KahlerStructure& k, const HermitianFormField& alpha, double R);

struct PositivityReport {
  double min_eigenvalue;
  std::size_t point;
  bool positive;
};

struct TrivialTwist {
  HermitianFormField alpha_prime;
  ScalarField green;
  PositivityReport positivity;
  /// sup |S - R Lambda alpha' - const| with const the omega-volume mean.
  double residual_sup;
  double constant;
};

/// alpha' = alpha + ddbar(G)/R with Delta G = S - S-bar, making omega itself
/// R alpha'-twisted cscK. Requires Lambda_omega alpha constant to 1e-8.
TrivialTwist trivial_twist(const KahlerStructure& k, const HermitianFormField& alpha, double R,
                           const KrylovConfig& cfg = {});

struct ApproximateSolution {
  int order;
  double R;
  /// phi_1 ... phi_m; the ladder adds sum_i R^{-i} phi_i to the base potential.
  std::vector<ScalarField> corrections;
  /// sum_i R^{-i} phi_i.
  ScalarField offset;
  /// Absolute potential: base potential + offset.
  ScalarField potential;
  ScalarField residual;
  double constant;
  double residual_sup;
  double residual_l2;
  /// Residual sup-norm before stage 1 and after each stage.
  std::vector<double> stage_residual_sup;
};

/// Frozen-operator ladder: psi_{i+1} = psi_i + delta_i / R with
/// F_{K0,alpha}(delta_i) = -e_i, e_i the twisted residual at psi_i.
ApproximateSolution build_approximate_solution(const KahlerStructure& k0, const HermitianFormField& alpha,
                                               double R, int order, const SolverConfig& cfg = {});

struct NewtonReport {
  explicit NewtonReport(const PeriodicGrid& grid) : potential(grid) {}

  bool converged = false;
  int iterations = 0;
  /// Residual sup-norm before the first step and after each accepted step.
  std::vector<double> residual_history;
  /// Absolute potential, omega-volume mean-zero for its own metric.
  ScalarField potential;
  int damping_steps = 0;
  /// Largest ratio of successive residuals over the last steps.
  double contraction = 0.0;
  std::vector<int> linear_iterations;
  double constant = 0.0;
  double residual_l2 = 0.0;
};

class StagnationError : public Error {
 public:
  StagnationError(const std::string& what, NewtonReport report)
      : Error(what), report_(std::move(report)) {}
  const NewtonReport& report() const noexcept { return report_; }

 private:
  NewtonReport report_;
};

/// Damped Newton from an absolute initial potential.
NewtonReport newton_solve(const HMatrix& g0, const HermitianFormField& alpha, double R,
                          const ScalarField& initial, const SolverConfig& cfg = {});
/// Same, with the initial potential given relative to k0.
NewtonReport newton_solve(const KahlerStructure& k0, const HermitianFormField& alpha, double R,
                          const ScalarField& relative_initial, const SolverConfig& cfg = {});

enum class IFTVerdict { solvable, not_solvable, inconclusive };
const char* to_string(IFTVerdict v);

struct IFTSampling {
  /// Starting s = 4 radius of the sampling ball.
  double initial_radius = 1.0;
  double shrink = 0.5;
  int max_rounds = 40;
  int samples_per_round = 4;
  int inverse_norm_iterations = 20;
  std::uint64_t seed = 1;
};

struct IFTCertificate {
  /// Estimate of the inverse of -D*D + R F from s = 0 to s = 4.
  double inverse_norm;
  /// Sampled radius delta' where the Lipschitz quotient of T - DT is <= 1/(2 ||P||).
  double lipschitz_radius;
  /// lipschitz_radius / (2 inverse_norm).
  double radius;
  /// s = 0 norm of T(0) - target.
  double defect;
  double worst_quotient;
  int rounds;
  IFTVerdict verdict;
};

IFTCertificate ift_certificate(const KahlerStructure& km, const HermitianFormField& alpha, double R,
                               const IFTSampling& sampling = {}, const KrylovConfig& cfg = {});

/// Newton at alpha_new warm-started from a solved absolute potential.
NewtonReport perturb_twist(const HMatrix& g0, const ScalarField& solved_potential,
                           const HermitianFormField& alpha_new, double R, const SolverConfig& cfg = {});

struct TwistStep {
  double fraction;
  bool converged;
  int iterations;
  double residual_sup;
};

struct TwistContinuationReport {
  std::vector<TwistStep> steps;
  ScalarField potential;
  bool completed;
  /// Largest fraction reached and the first failing one (equal to 1 when completed).
  double last_success;
  double first_failure;
};

/// Moves the twist from alpha_old to alpha_new in equal steps, Newton at each.
TwistContinuationReport twist_continuation(const HMatrix& g0, const ScalarField& solved_potential,
                                           const HermitianFormField& alpha_old,
                                           const HermitianFormField& alpha_new, double R, int steps,
                                           const SolverConfig& cfg = {});

struct SweepStep {
  double t;
  double R;
  bool converged;
  int newton_iterations;
  double residual_sup;
  double residual_l2;
  /// Eigenvalue of -D*D + R F closest to zero at the solution (NaN if not computed).
  double lambda1;
  std::string warm_start;
  double wall_ms;
  double constant;
  std::optional<ScalarField> potential;
};

struct ContinuationReport {
  std::vector<SweepStep> steps;
  bool all_converged;
  /// Smallest R with a converged solve (infinity if none).
  double smallest_R;
  /// First failing R after the last success, if any.
  std::optional<double> failure_R;
};

struct SweepOptions {
  int ladder_order = 2;
  bool eigenvalues = true;
};

/// Seed omega_0 := alpha / c where g0_alpha = c g0_omega (or alpha constant):
/// then Lambda_{omega_0} alpha is constant. Throws PreconditionError otherwise.
KahlerStructure seed_structure(const HMatrix& g0_omega, const HermitianFormField& alpha);

/// Solves S - R Lambda alpha = const with R = (1 - t)/t along an increasing t grid in (0, 1].
ContinuationReport continuity_sweep(const HMatrix& g0_omega, const HermitianFormField& alpha,
                                    std::span<const double> t, const SolverConfig& cfg = {},
                                    const SweepOptions& options = {});

struct ThresholdOptions {
  double R_start = 50.0;
  double R_min = 1e-2;
  double factor = 0.5;
  double bisection_tolerance = 1e-3;
  int ladder_order = 2;
};

struct ThresholdReport {
  /// Smallest R where warm-started Newton converged.
  double threshold;
  /// [R_fail, R_ok]; R_fail = R_ok = 0 when R = 0 was reached.
  double R_fail;
  double R_ok;
  bool reached_zero;
  std::vector<SweepStep> steps;
};

/// Decreasing-R continuation from R_start by `factor` down to R_min, then
/// R = 0, bisecting at the first failure.
ThresholdReport estimate_R_threshold(const HMatrix& g0_omega, const HermitianFormField& alpha,
                                     const SolverConfig& cfg = {}, const ThresholdOptions& options = {});

}  // namespace twistk
