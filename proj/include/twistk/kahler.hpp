#pragma once

// Kähler metrics g = g0 + ddbar(phi) on the flat torus and the pointwise
// geometric quantities built from them.
//
// Index convention: a (1,1)-form a is stored as the Hermitian array
// a(j,k) = a_{j kbar}. Contraction with the inverse metric is
// tr(g^{-1} a) and the (1,1) pairing is (a,b)_g = tr(g^{-1} a g^{-1} b).

#include <cstddef>
#include <optional>
#include <vector>

#include "twistk/grid.hpp"
#include "twistk/hermitian.hpp"

namespace twistk {

class HermitianFormField {
 public:
  /// components holds n*n fields in row-major (j,k) order.
  HermitianFormField(PeriodicGrid grid, std::vector<ComplexField> components);

  /// constant + i ddbar(potential); closed by construction.
  static HermitianFormField closed(const HMatrix& constant, const ScalarField& potential);
  static HermitianFormField constant(const PeriodicGrid& grid, const HMatrix& value);

  int dim() const noexcept { return n_; }
  const PeriodicGrid& grid() const noexcept { return grid_; }
  const ComplexField& component(int j, int k) const { return components_[j * n_ + k]; }
  HMatrix at(std::size_t point) const;

  bool is_closed() const noexcept { return closed_.has_value(); }
  /// Constant part and potential of a closed form; throws StructuralError otherwise.
  const HMatrix& constant_part() const;
  const ScalarField& potential() const;

  double hermitian_defect() const;
  /// Smallest pointwise eigenvalue; writes the attaining point if requested.
  double min_eigenvalue(std::size_t* where = nullptr) const;

  /// Closed form with potential extended by `extra` (constant part unchanged).
  HermitianFormField plus_ddbar(const ScalarField& extra) const;
  /// Scales the form (and its closed data).
  HermitianFormField scaled(double s) const;

 private:
  struct ClosedData {
    HMatrix constant;
    ScalarField potential;
  };

  PeriodicGrid grid_;
  int n_;
  std::vector<ComplexField> components_;
  std::optional<ClosedData> closed_;
};

/// Components d_j dbar_k f of i ddbar f, made exactly Hermitian.
std::vector<ComplexField> ddbar_components(const ScalarField& f);

class KahlerStructure {
 public:
  const PeriodicGrid& grid() const noexcept { return metric_.grid(); }
  int dim() const noexcept { return metric_.dim(); }
  const HMatrix& g0() const noexcept { return g0_; }
  const ScalarField& potential() const noexcept { return potential_; }
  const HermitianFormField& metric() const noexcept { return metric_; }
  /// det g, positive at every point.
  const ScalarField& det() const noexcept { return det_; }
  /// Entry (j,k) of the pointwise matrix inverse of (g_{j kbar}).
  const ComplexField& inverse_component(int j, int k) const { return inverse_[j * dim() + k]; }
  HMatrix inverse_at(std::size_t point) const;

  friend KahlerStructure metric_from_potential(const HMatrix& g0, const ScalarField& phi);

 private:
  KahlerStructure(HMatrix g0, ScalarField potential, HermitianFormField metric,
                  std::vector<ComplexField> inverse, ScalarField det)
      : g0_(std::move(g0)),
        potential_(std::move(potential)),
        metric_(std::move(metric)),
        inverse_(std::move(inverse)),
        det_(std::move(det)) {}

  HMatrix g0_;
  ScalarField potential_;
  HermitianFormField metric_;
  std::vector<ComplexField> inverse_;
  ScalarField det_;
};

/// g = g0 + ddbar(phi) with cached inverse and determinant. Throws
/// DegenerateMetricError when g is not positive definite somewhere.
KahlerStructure metric_from_potential(const HMatrix& g0, const ScalarField& phi);

/// Flat structure g = g0.
KahlerStructure flat_structure(const PeriodicGrid& grid, const HMatrix& g0);

/// Class-level averages; only the constant matrices of [omega] and [alpha] enter.
struct CohomologyData {
  HMatrix omega_class;
  HMatrix alpha_class;

  /// Average scalar curvature; zero on a flat torus.
  double scalar_average() const noexcept { return 0.0; }
  /// c = n int alpha ^ omega^{n-1} / int omega^n = tr(g0_omega^{-1} g0_alpha).
  double trace_average() const;
};

CohomologyData cohomology(const HMatrix& omega_class, const HMatrix& alpha_class);

HermitianFormField ricci_form(const KahlerStructure& k);
ScalarField scalar_curvature(const KahlerStructure& k);
/// Lambda_omega alpha = tr(g^{-1} alpha).
ScalarField trace_form(const KahlerStructure& k, const HermitianFormField& alpha);
/// Delta_omega f = tr(g^{-1} ddbar f).
ScalarField laplacian(const KahlerStructure& k, const ScalarField& f);
/// (alpha, beta)_omega = tr(g^{-1} alpha g^{-1} beta).
ScalarField form_pairing(const KahlerStructure& k, const HermitianFormField& alpha,
                         const HermitianFormField& beta);
/// Re g^{j kbar} d_j f dbar_k h.
ScalarField gradient_pairing(const KahlerStructure& k, const ScalarField& f,
                             const ScalarField& h);

/// int f omega^n / int omega^n by uniform quadrature weighted with det g.
double volume_average(const KahlerStructure& k, const ScalarField& f);
/// sum_x det g(x) a(x) b(x): the omega-volume inner product up to a constant.
double volume_inner(const KahlerStructure& k, const ScalarField& a, const ScalarField& b);
/// f minus its omega-volume average.
ScalarField project_mean_zero(const KahlerStructure& k, const ScalarField& f);

}  // namespace twistk
