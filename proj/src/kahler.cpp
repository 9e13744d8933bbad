#include "twistk/kahler.hpp"

#include <cmath>
#include <limits>

namespace twistk {

HermitianFormField::HermitianFormField(PeriodicGrid grid, std::vector<ComplexField> components)
    : grid_(std::move(grid)), n_(grid_.complex_dim()), components_(std::move(components)) {
  if (static_cast<int>(components_.size()) != n_ * n_)
    throw StructuralError("Hermitian form needs " + std::to_string(n_ * n_) + " components");
  for (const auto& c : components_)
    if (c.grid() != grid_) throw StructuralError("form component lives on another grid");
}

std::vector<ComplexField> ddbar_components(const ScalarField& f) {
  const int n = f.grid().complex_dim();
  const auto coeffs = forward_transform(f);
  std::vector<ComplexField> comps(static_cast<std::size_t>(n * n), ComplexField(f.grid()));
  for (int j = 0; j < n; ++j) {
    for (int k = j; k < n; ++k) {
      auto d = complex_derivative(coeffs, {dz(j), dzbar(k)});
      if (j == k) {
        for (auto& v : d.values()) v = v.real();
      } else {
        ComplexField lower(f.grid());
        for (std::size_t p = 0; p < d.size(); ++p) lower[p] = std::conj(d[p]);
        comps[k * n + j] = std::move(lower);
      }
      comps[j * n + k] = std::move(d);
    }
  }
  return comps;
}

HermitianFormField HermitianFormField::closed(const HMatrix& constant, const ScalarField& potential) {
  const int n = potential.grid().complex_dim();
  if (constant.rows() != n || constant.cols() != n)
    throw StructuralError("constant part does not match complex dimension");
  auto comps = ddbar_components(potential);
  for (int j = 0; j < n; ++j)
    for (int k = 0; k < n; ++k) comps[j * n + k] += constant(j, k);
  HermitianFormField form(potential.grid(), std::move(comps));
  form.closed_ = ClosedData{constant, potential};
  return form;
}

HermitianFormField HermitianFormField::constant(const PeriodicGrid& grid, const HMatrix& value) {
  return closed(value, ScalarField(grid));
}

HMatrix HermitianFormField::at(std::size_t point) const {
  HMatrix m(n_, n_);
  for (int j = 0; j < n_; ++j)
    for (int k = 0; k < n_; ++k) m(j, k) = components_[j * n_ + k][point];
  return m;
}

const HMatrix& HermitianFormField::constant_part() const {
  if (!closed_) throw StructuralError("form carries no closed representation");
  return closed_->constant;
}

const ScalarField& HermitianFormField::potential() const {
  if (!closed_) throw StructuralError("form carries no closed representation");
  return closed_->potential;
}

double HermitianFormField::hermitian_defect() const {
  double worst = 0.0;
  for (std::size_t p = 0; p < grid_.points(); ++p)
    worst = std::max(worst, twistk::hermitian_defect(at(p)));
  return worst;
}

double HermitianFormField::min_eigenvalue(std::size_t* where) const {
  double lo = std::numeric_limits<double>::infinity();
  std::size_t arg = 0;
  for (std::size_t p = 0; p < grid_.points(); ++p) {
    const double e = twistk::min_eigenvalue(at(p));
    if (e < lo) {
      lo = e;
      arg = p;
    }
  }
  if (where) *where = arg;
  return lo;
}

HermitianFormField HermitianFormField::plus_ddbar(const ScalarField& extra) const {
  return closed(constant_part(), potential() + extra);
}

HermitianFormField HermitianFormField::scaled(double s) const {
  if (closed_) return closed(closed_->constant * s, closed_->potential * s);
  auto comps = components_;
  for (auto& c : comps) c *= cplx(s);
  return HermitianFormField(grid_, std::move(comps));
}

// ---------------------------------------------------------------------------

HMatrix KahlerStructure::inverse_at(std::size_t point) const {
  const int n = dim();
  HMatrix m(n, n);
  for (int j = 0; j < n; ++j)
    for (int k = 0; k < n; ++k) m(j, k) = inverse_[j * n + k][point];
  return m;
}

KahlerStructure metric_from_potential(const HMatrix& g0, const ScalarField& phi) {
  const auto& grid = phi.grid();
  const int n = grid.complex_dim();
  if (g0.rows() != n || g0.cols() != n)
    throw StructuralError("constant metric does not match complex dimension");
  if (hermitian_defect(g0) > 1e-12 || min_eigenvalue(g0) <= 0.0)
    throw DomainError("constant metric must be Hermitian positive definite");

  auto metric = HermitianFormField::closed(g0, phi);
  std::vector<ComplexField> inverse(static_cast<std::size_t>(n * n), ComplexField(grid));
  ScalarField det(grid);

  double worst = std::numeric_limits<double>::infinity();
  std::size_t worst_point = 0;
  for (std::size_t p = 0; p < grid.points(); ++p) {
    const HMatrix g = metric.at(p);
    const double e = min_eigenvalue(g);
    if (e < worst) {
      worst = e;
      worst_point = p;
    }
    if (e <= 0.0) continue;
    det[p] = hermitian_det(g);
    const HMatrix ginv = g.inverse();
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) inverse[j * n + k][p] = ginv(j, k);
  }
  if (worst <= 0.0) throw DegenerateMetricError(worst_point, worst, "g0 + ddbar(phi) is not positive");
  return KahlerStructure(g0, phi, std::move(metric), std::move(inverse), std::move(det));
}

KahlerStructure flat_structure(const PeriodicGrid& grid, const HMatrix& g0) {
  return metric_from_potential(g0, ScalarField(grid));
}

double CohomologyData::trace_average() const {
  return (omega_class.inverse() * alpha_class).trace().real();
}

CohomologyData cohomology(const HMatrix& omega_class, const HMatrix& alpha_class) {
  if (omega_class.rows() != alpha_class.rows())
    throw StructuralError("class matrices differ in dimension");
  if (min_eigenvalue(omega_class) <= 0.0) throw DomainError("[omega] must be a Kähler class");
  return CohomologyData{omega_class, alpha_class};
}

// ---------------------------------------------------------------------------

namespace {

// Re sum_{jk} ginv(k,j) a(j,k) = Re tr(g^{-1} a), component arrays of a given.
ScalarField contract(const KahlerStructure& k, const std::vector<const ComplexField*>& a) {
  const int n = k.dim();
  ScalarField out(k.grid());
  const std::size_t points = k.grid().points();
#pragma omp parallel for
  for (std::size_t p = 0; p < points; ++p) {
    cplx s = 0.0;
    for (int j = 0; j < n; ++j)
      for (int l = 0; l < n; ++l) s += k.inverse_component(l, j)[p] * (*a[j * n + l])[p];
    out[p] = s.real();
  }
  return out;
}

std::vector<const ComplexField*> pointers(const std::vector<ComplexField>& comps) {
  std::vector<const ComplexField*> out;
  for (const auto& c : comps) out.push_back(&c);
  return out;
}

std::vector<const ComplexField*> pointers(const HermitianFormField& f) {
  std::vector<const ComplexField*> out;
  for (int j = 0; j < f.dim(); ++j)
    for (int l = 0; l < f.dim(); ++l) out.push_back(&f.component(j, l));
  return out;
}

void check_grid(const KahlerStructure& k, const PeriodicGrid& g) {
  if (k.grid() != g) throw StructuralError("field and metric live on different grids");
}

}  // namespace

HermitianFormField ricci_form(const KahlerStructure& k) {
  ScalarField log_det(k.grid());
  for (std::size_t p = 0; p < log_det.size(); ++p) log_det[p] = std::log(k.det()[p]);
  return HermitianFormField::closed(HMatrix::Zero(k.dim(), k.dim()), -log_det);
}

ScalarField scalar_curvature(const KahlerStructure& k) {
  return trace_form(k, ricci_form(k));
}

ScalarField trace_form(const KahlerStructure& k, const HermitianFormField& alpha) {
  check_grid(k, alpha.grid());
  return contract(k, pointers(alpha));
}

ScalarField laplacian(const KahlerStructure& k, const ScalarField& f) {
  check_grid(k, f.grid());
  const auto comps = ddbar_components(f);
  return contract(k, pointers(comps));
}

ScalarField form_pairing(const KahlerStructure& k, const HermitianFormField& alpha,
                         const HermitianFormField& beta) {
  check_grid(k, alpha.grid());
  check_grid(k, beta.grid());
  ScalarField out(k.grid());
  const std::size_t points = k.grid().points();
#pragma omp parallel for
  for (std::size_t p = 0; p < points; ++p) {
    const HMatrix ginv = k.inverse_at(p);
    out[p] = (ginv * alpha.at(p) * ginv * beta.at(p)).trace().real();
  }
  return out;
}

ScalarField gradient_pairing(const KahlerStructure& k, const ScalarField& f, const ScalarField& h) {
  check_grid(k, f.grid());
  check_grid(k, h.grid());
  const int n = k.dim();
  const auto fc = forward_transform(f);
  const auto hc = forward_transform(h);
  std::vector<ComplexField> df, dbh;
  for (int j = 0; j < n; ++j) {
    df.push_back(complex_derivative(fc, {dz(j)}));
    dbh.push_back(complex_derivative(hc, {dzbar(j)}));
  }
  ScalarField out(k.grid());
  for (std::size_t p = 0; p < out.size(); ++p) {
    cplx s = 0.0;
    for (int j = 0; j < n; ++j)
      for (int l = 0; l < n; ++l) s += k.inverse_component(l, j)[p] * df[j][p] * dbh[l][p];
    out[p] = s.real();
  }
  return out;
}

double volume_average(const KahlerStructure& k, const ScalarField& f) {
  check_grid(k, f.grid());
  double num = 0.0, den = 0.0;
  for (std::size_t p = 0; p < f.size(); ++p) {
    num += k.det()[p] * f[p];
    den += k.det()[p];
  }
  return num / den;
}

double volume_inner(const KahlerStructure& k, const ScalarField& a, const ScalarField& b) {
  check_grid(k, a.grid());
  a.check_same(b);
  double s = 0.0;
  for (std::size_t p = 0; p < a.size(); ++p) s += k.det()[p] * a[p] * b[p];
  return s;
}

ScalarField project_mean_zero(const KahlerStructure& k, const ScalarField& f) {
  ScalarField out = f;
  out += -volume_average(k, f);
  return out;
}

}  // namespace twistk
