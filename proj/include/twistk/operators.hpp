#pragma once

// Matrix-free linear operators around a Kähler structure:
//   F_{omega,alpha}(phi)  = (alpha, i ddbar phi)_omega + (d Lambda_omega alpha, dbar phi)_omega
//   D*D phi               (Lichnerowicz operator, D phi = dbar grad^{1,0} phi)
//   full linearization of phi -> S(omega_phi) - R Lambda_{omega_phi} alpha
//   shifted combination   -D*D + R F
//
// F and D*D are applied in flux (divergence) form, i.e. as
// (1/det g) times the real adjoint of dbar composed with a pointwise positive
// weight. That form is exactly self-adjoint on the grid with respect to the
// omega-volume inner product; the textbook pointwise formulas are kept as
// apply_F_pointwise / apply_lichnerowicz_pointwise and agree with the flux
// forms up to aliasing error.

#include <memory>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "twistk/kahler.hpp"

namespace twistk {

enum class OperatorKind { F, lichnerowicz, full_linearization, shifted };

class LinearOperatorHandle {
 public:
  /// alpha is required for every kind except lichnerowicz; scale is R >= 0.
  LinearOperatorHandle(OperatorKind kind, std::shared_ptr<const KahlerStructure> structure,
                       std::optional<HermitianFormField> alpha, double scale = 0.0,
                       bool mean_zero = false);

  OperatorKind kind() const noexcept { return kind_; }
  const KahlerStructure& structure() const noexcept { return *structure_; }
  std::shared_ptr<const KahlerStructure> structure_ptr() const noexcept { return structure_; }
  const HermitianFormField& alpha() const;
  double scale() const noexcept { return scale_; }
  bool mean_zero() const noexcept { return mean_zero_; }
  const PeriodicGrid& grid() const noexcept { return structure_->grid(); }

  ScalarField apply(const ScalarField& phi) const;

  /// True when the operator is self-adjoint for the omega-volume inner product.
  bool self_adjoint() const noexcept { return kind_ != OperatorKind::full_linearization; }

  /// Fourier symbol of the same operator with g and alpha frozen to their
  /// constant parts; used for preconditioning.
  const std::vector<double>& flat_symbol() const noexcept { return flat_symbol_; }

 private:
  struct Cache;

  OperatorKind kind_;
  std::shared_ptr<const KahlerStructure> structure_;
  std::optional<HermitianFormField> alpha_;
  double scale_;
  bool mean_zero_;
  std::shared_ptr<const Cache> cache_;
  std::vector<double> flat_symbol_;
};

/// Flux-form F_{omega,alpha}.
ScalarField apply_F(const KahlerStructure& k, const HermitianFormField& alpha,
                    const ScalarField& phi);
/// Two-term pointwise formula via form_pairing and gradient_pairing.
ScalarField apply_F_pointwise(const KahlerStructure& k, const HermitianFormField& alpha,
                              const ScalarField& phi);

/// D*D in adjoint form (discretely self-adjoint, positive semidefinite).
ScalarField apply_lichnerowicz(const KahlerStructure& k, const ScalarField& phi);
/// Delta^2 phi + (Ric, i ddbar phi) + (dS, dbar phi).
ScalarField apply_lichnerowicz_pointwise(const KahlerStructure& k, const ScalarField& phi);

/// Exact derivative of phi -> S(omega_phi) - R Lambda_{omega_phi} alpha at k,
/// -D*D psi + (dS, dbar psi) + R (alpha, i ddbar psi).
ScalarField apply_full_linearization(const KahlerStructure& k, const HermitianFormField& alpha,
                                     double R, const ScalarField& psi);

/// -D*D + R F in flux form.
ScalarField apply_shifted(const KahlerStructure& k, const HermitianFormField& alpha, double R,
                          const ScalarField& phi);

/// xi_phi^j = g^{j kbar} dbar_k phi and ||xi_phi||^2_alpha = alpha_{j kbar} xi^j conj(xi^k),
/// using the same dbar as the flux forms.
ScalarField xi_norm2(const KahlerStructure& k, const HermitianFormField& alpha,
                     const ScalarField& phi);

/// Column-by-column dense matrix of an operator on a grid with at most
/// 4096 points (oracle use only).
Eigen::MatrixXd dense_assemble(const LinearOperatorHandle& op);

inline constexpr std::size_t kDenseLimit = 4096;

}  // namespace twistk
