#pragma once

// Deliberately naive reference computations used by the tests and the
// acceptance harness: finite differences, dense spectra, log-log fits and
// index-by-index pairings.

#include <functional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "twistk/operators.hpp"

namespace twistk {

using NonlinearMap = std::function<ScalarField(const ScalarField&)>;

struct FDEstimate {
  ScalarField derivative;
  /// Relative change between the two central differences the estimate came from.
  double richardson_error;
  double epsilon;
};

/// Central differences (N(phi + e psi) - N(phi - e psi)) / 2e over the
/// schedule, Richardson-combined pairwise; the pair with the smallest
/// successive difference wins. Steps at which the metric degenerates are dropped.
FDEstimate fd_directional_derivative(const NonlinearMap& map, const ScalarField& phi,
                                     const ScalarField& psi,
                                     std::vector<double> schedule = {1e-3, 1e-4, 1e-5, 1e-6, 1e-7});

/// phi -> S(omega_phi) - R Lambda_{omega_phi} alpha with omega_phi = g0 + ddbar phi.
NonlinearMap twisted_map(const HMatrix& g0, const HermitianFormField& alpha, double R);

struct SpectrumReport {
  std::vector<double> eigenvalues;  // ascending
  /// max |B - B^T| / max |B| for B = W^{1/2} M W^{-1/2}.
  double symmetry_defect;
};

/// Full symmetric eigendecomposition of the omega-volume symmetrization of
/// a dense-assembled operator (at most 4096 points).
SpectrumReport dense_spectrum(const LinearOperatorHandle& op);

struct DefinitenessReport {
  double symmetry_defect;
  /// ||M 1|| / ||M||: constants lie in the kernel.
  double constant_residual;
  /// Cholesky of -B_sym + sigma u u^T - tau I succeeded, i.e. -B > tau on
  /// the complement of the constants.
  bool negative_definite_on_mean_zero;
  double margin;
};

/// Negative definiteness of a self-adjoint operator off the constants,
/// certified by a Cholesky factorization instead of a full spectrum.
DefinitenessReport definiteness_certificate(const LinearOperatorHandle& op, double relative_margin = 1e-8);

struct FitResult {
  double slope;
  double intercept;
  /// Largest |log y - (slope log x + intercept)|.
  double max_deviation;
  std::size_t samples;
};

/// Least-squares fit of log y against log x. Needs >= 4 distinct positive samples.
FitResult order_fit(std::span<const double> x, std::span<const double> y);

/// Index-by-index g^{j lbar} g^{m kbar} a_{j kbar} b_{m lbar}.
ScalarField naive_form_pairing(const KahlerStructure& k, const HermitianFormField& a,
                               const HermitianFormField& b);
/// Index-by-index Re g^{j kbar} d_j f dbar_k h with derivatives from the
/// real partials of f and h.
ScalarField naive_gradient_pairing(const KahlerStructure& k, const ScalarField& f,
                                   const ScalarField& h);

/// Fourth-order central finite-difference value of a Wirtinger derivative of
/// order <= 2 of a smooth function of the real coordinates.
cplx fd_wirtinger(const std::function<double(std::span<const double>)>& fn,
                  std::span<const double> x, const MultiIndex& which, double h = 1e-2);

}  // namespace twistk
