#pragma once

// Krylov solvers for the linear problems around a Kähler structure and
// eigenvalue / inverse-norm estimation for the shifted operator.
//
// Symmetric problems (F, -D*D + R F) run preconditioned CG on -W A, where W
// is the pointwise volume density det g; A is self-adjoint for the
// omega-volume inner product, so -W A is an ordinary symmetric positive
// semidefinite matrix whose kernel is the constants. Non-symmetric problems
// (the pointwise Laplacian, the full linearization) use restarted GMRES with
// right preconditioning. Every returned field is omega-volume mean-zero.

#include <cstdint>
#include <functional>
#include <vector>

#include "twistk/operators.hpp"

namespace twistk {

enum class PreconditionerKind { flat_laplacian, flat_bilaplacian_shift, none };

/// Any kind other than none selects the constant-coefficient (g0, alpha0)
/// symbol of the operator being inverted: a flat Laplacian for second-order
/// problems, the flat bi-Laplacian shift for fourth-order ones.
struct KrylovConfig {
  double tolerance = 1e-10;
  int max_iterations = 2000;
  PreconditionerKind preconditioner = PreconditionerKind::flat_laplacian;
  int restart = 50;

  /// Throws DomainError unless tolerance is in (0, 1e-2] and the counts are >= 1.
  void validate() const;
};

struct KrylovResult {
  ScalarField solution;
  int iterations = 0;
  /// Relative residual ||A x - f|| / ||f|| after each iteration.
  std::vector<double> history;
};

using LinearMap = std::function<ScalarField(const ScalarField&)>;

/// CG on the omega-self-adjoint operator `apply`, negative semidefinite with
/// the constants as kernel. `symbol` is the frozen-coefficient Fourier symbol
/// (empty for no preconditioning). f must be omega-mean-zero.
KrylovResult solve_self_adjoint(const KahlerStructure& k, const LinearMap& apply,
                                std::span<const double> symbol, const ScalarField& f,
                                const KrylovConfig& cfg, const ScalarField* guess = nullptr);

/// Restarted right-preconditioned GMRES for an operator annihilating the
/// constants, posed on Euclidean-mean-zero fields. With project_range the
/// stopping test uses the residual with its Euclidean mean removed, for
/// operators whose range is only approximately the mean-zero hyperplane.
KrylovResult solve_general(const KahlerStructure& k, const LinearMap& apply,
                           std::span<const double> symbol, const ScalarField& f,
                           const KrylovConfig& cfg, const ScalarField* guess = nullptr,
                           bool project_range = false);

/// F_{omega,alpha}(phi) = f. Requires Lambda_omega alpha constant to 1e-8.
ScalarField solve_F(const KahlerStructure& k, const HermitianFormField& alpha, const ScalarField& f,
                    const KrylovConfig& cfg = {});

/// Delta_omega G = f.
ScalarField green_solve(const KahlerStructure& k, const ScalarField& f, const KrylovConfig& cfg = {});

/// (-D*D + R F)(phi) = f, R > 0.
ScalarField solve_shifted(const KahlerStructure& k, const HermitianFormField& alpha, double R,
                          const ScalarField& f, const KrylovConfig& cfg = {});

/// Linearization DN(psi) = f by GMRES, up to a constant in the residual
/// (used by Newton).
KrylovResult solve_linearization(const KahlerStructure& k, const HermitianFormField& alpha,
                                 double R, const ScalarField& f, const KrylovConfig& cfg);

struct EigenConfig {
  int block = 8;
  int max_iterations = 100;
  /// Relative residual ||L v - lambda v|| / ||v|| required for success.
  double tolerance = 1e-6;
  KrylovConfig inner{};
  std::uint64_t seed = 1;
};

struct EigenEstimate {
  double eigenvalue = 0.0;
  ScalarField eigenfield;
  double residual_norm = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Eigenvalue closest to zero of a self-adjoint, negative definite handle on
/// the omega-mean-zero subspace: block inverse iteration with Rayleigh-Ritz
/// in the omega-volume inner product.
EigenEstimate extreme_eigenvalue(const LinearOperatorHandle& op, const EigenConfig& cfg = {});

struct InverseNormEstimate {
  double norm = 0.0;
  int iterations = 0;
};

/// Power-iteration estimate of the norm of the inverse of a self-adjoint
/// handle as a map from the s = 0 to the s = 4 spectral norm.
InverseNormEstimate inverse_norm_estimate(const LinearOperatorHandle& op, const KrylovConfig& cfg = {},
                                          int iterations = 25, std::uint64_t seed = 7);

/// Seeded smooth random field: Gaussian amplitudes on modes |k_a| <= kmax,
/// decaying like (1 + |k|^2)^{-1}; Euclidean mean removed.
ScalarField random_smooth_field(const PeriodicGrid& grid, std::uint64_t seed, int kmax = 3);

}  // namespace twistk
