#include "twistk/operators.hpp"

#include <cmath>

namespace twistk {

namespace {

struct FluxSymbols {
  std::vector<std::vector<cplx>> dz, dzbar;

  explicit FluxSymbols(const PeriodicGrid& grid) {
    for (int j = 0; j < grid.complex_dim(); ++j) {
      dz.push_back(flux_symbol(grid, Wirtinger::dz, j));
      dzbar.push_back(flux_symbol(grid, Wirtinger::dzbar, j));
    }
  }
};

// dbar_l phi for every l, from one forward transform.
std::vector<ComplexField> flux_dbar_all(const FluxSymbols& sym, const ComplexField& f) {
  const auto c = forward_transform(f);
  std::vector<ComplexField> out;
  for (const auto& s : sym.dzbar) {
    SpectralCoeffs d{c.grid, c.coeffs};
    for (std::size_t p = 0; p < s.size(); ++p) d.coeffs[p] *= s[p];
    out.push_back(inverse_transform(d));
  }
  return out;
}

// sum_l d_l y_l.
ComplexField flux_divergence(const FluxSymbols& sym, const std::vector<const ComplexField*>& y) {
  const PeriodicGrid& grid = y.front()->grid();
  SpectralCoeffs acc{grid, std::vector<cplx>(grid.points(), 0.0)};
  for (std::size_t l = 0; l < y.size(); ++l) {
    const auto c = forward_transform(*y[l]);
    for (std::size_t p = 0; p < c.coeffs.size(); ++p) acc.coeffs[p] += sym.dz[l][p] * c.coeffs[p];
  }
  return inverse_transform(acc);
}

// Hw(j,l) = det g (g^{-1} a g^{-1})(l,j): the pointwise weight of the F flux.
std::vector<ComplexField> f_flux_weight(const KahlerStructure& k, const HermitianFormField& alpha) {
  const int n = k.dim();
  std::vector<ComplexField> w(static_cast<std::size_t>(n * n), ComplexField(k.grid()));
  for (std::size_t p = 0; p < k.grid().points(); ++p) {
    const HMatrix ginv = k.inverse_at(p);
    const HMatrix h = ginv * alpha.at(p) * ginv;
    for (int j = 0; j < n; ++j)
      for (int l = 0; l < n; ++l) w[j * n + l][p] = k.det()[p] * h(l, j);
  }
  return w;
}

ScalarField flux_F(const KahlerStructure& k, const FluxSymbols& sym,
                   const std::vector<ComplexField>& weight, const ScalarField& phi) {
  const int n = k.dim();
  const auto b = flux_dbar_all(sym, to_complex(phi));
  std::vector<ComplexField> y(static_cast<std::size_t>(n), ComplexField(k.grid()));
  for (std::size_t p = 0; p < k.grid().points(); ++p)
    for (int j = 0; j < n; ++j) {
      cplx s = 0.0;
      for (int l = 0; l < n; ++l) s += weight[j * n + l][p] * b[l][p];
      y[j][p] = s;
    }
  std::vector<const ComplexField*> yp;
  for (const auto& v : y) yp.push_back(&v);
  const auto div = flux_divergence(sym, yp);
  ScalarField out(k.grid());
  for (std::size_t p = 0; p < out.size(); ++p) out[p] = div[p].real() / k.det()[p];
  return out;
}

ScalarField flux_lichnerowicz(const KahlerStructure& k, const FluxSymbols& sym,
                              const ScalarField& phi) {
  const int n = k.dim();
  const std::size_t points = k.grid().points();
  const auto b = flux_dbar_all(sym, to_complex(phi));

  // xi = g^{-T} b, the (1,0)-gradient.
  std::vector<ComplexField> xi(static_cast<std::size_t>(n), ComplexField(k.grid()));
  for (std::size_t p = 0; p < points; ++p)
    for (int j = 0; j < n; ++j) {
      cplx s = 0.0;
      for (int l = 0; l < n; ++l) s += k.inverse_component(l, j)[p] * b[l][p];
      xi[j][p] = s;
    }

  // V(m,l) = dbar_l xi_m.
  std::vector<ComplexField> v;
  for (int m = 0; m < n; ++m) {
    auto row = flux_dbar_all(sym, xi[m]);
    for (auto& f : row) v.push_back(std::move(f));
  }

  // U = det g * g^T V g^{-1}.
  std::vector<ComplexField> u(static_cast<std::size_t>(n * n), ComplexField(k.grid()));
  for (std::size_t p = 0; p < points; ++p) {
    const HMatrix g = k.metric().at(p);
    const HMatrix ginv = k.inverse_at(p);
    HMatrix vm(n, n);
    for (int m = 0; m < n; ++m)
      for (int l = 0; l < n; ++l) vm(m, l) = v[m * n + l][p];
    const HMatrix um = k.det()[p] * (g.transpose() * vm * ginv);
    for (int j = 0; j < n; ++j)
      for (int l = 0; l < n; ++l) u[j * n + l][p] = um(j, l);
  }

  // c_j = sum_l d_l U(j,l); b'_l = sum_j ginv(j,l) c_j.
  std::vector<ComplexField> c;
  for (int j = 0; j < n; ++j) {
    std::vector<const ComplexField*> row;
    for (int l = 0; l < n; ++l) row.push_back(&u[j * n + l]);
    c.push_back(flux_divergence(sym, row));
  }
  std::vector<ComplexField> bp(static_cast<std::size_t>(n), ComplexField(k.grid()));
  for (std::size_t p = 0; p < points; ++p)
    for (int l = 0; l < n; ++l) {
      cplx s = 0.0;
      for (int j = 0; j < n; ++j) s += k.inverse_component(j, l)[p] * c[j][p];
      bp[l][p] = s;
    }
  std::vector<const ComplexField*> bpp;
  for (const auto& f : bp) bpp.push_back(&f);
  const auto div = flux_divergence(sym, bpp);
  ScalarField out(k.grid());
  for (std::size_t p = 0; p < points; ++p) out[p] = div[p].real() / k.det()[p];
  return out;
}

// Pointwise weight Q(j,l) with (Q, ddbar psi) = R (alpha, i ddbar psi) - (Ric, i ddbar psi).
std::vector<ComplexField> linearization_weight(const KahlerStructure& k,
                                               const HermitianFormField& alpha, double R) {
  const int n = k.dim();
  const auto ric = ricci_form(k);
  std::vector<ComplexField> q(static_cast<std::size_t>(n * n), ComplexField(k.grid()));
  for (std::size_t p = 0; p < k.grid().points(); ++p) {
    const HMatrix ginv = k.inverse_at(p);
    const HMatrix m = ginv * (R * alpha.at(p) - ric.at(p)) * ginv;
    for (int j = 0; j < n; ++j)
      for (int l = 0; l < n; ++l) q[j * n + l][p] = m(j, l);
  }
  return q;
}

// -Delta(Delta psi) + tr(Q ddbar psi). Equal, term by term, to
// -D*D psi + (dS, dbar psi) - R (d Lambda alpha, dbar psi)
//   + R (alpha, i ddbar psi) + R (d Lambda alpha, dbar psi)
// once D*D is expanded through Delta^2 + (Ric, i ddbar) + (dS, dbar):
// the gradient terms cancel exactly.
ScalarField pointwise_linearization(const KahlerStructure& k, const std::vector<ComplexField>& q,
                                    const ScalarField& psi) {
  const int n = k.dim();
  const auto d = ddbar_components(psi);
  ScalarField lap(k.grid());
  ScalarField twist(k.grid());
  for (std::size_t p = 0; p < lap.size(); ++p) {
    cplx s = 0.0, t = 0.0;
    for (int j = 0; j < n; ++j)
      for (int l = 0; l < n; ++l) {
        s += k.inverse_component(l, j)[p] * d[j * n + l][p];
        t += q[l * n + j][p] * d[j * n + l][p];
      }
    lap[p] = s.real();
    twist[p] = t.real();
  }
  return twist - laplacian(k, lap);
}

HMatrix constant_part_of(const HermitianFormField& alpha) {
  if (alpha.is_closed()) return alpha.constant_part();
  const int n = alpha.dim();
  HMatrix m(n, n);
  for (int j = 0; j < n; ++j)
    for (int l = 0; l < n; ++l) {
      cplx s = 0.0;
      for (const cplx& v : alpha.component(j, l).values()) s += v;
      m(j, l) = s / static_cast<double>(alpha.grid().points());
    }
  return m;
}

}  // namespace

struct LinearOperatorHandle::Cache {
  FluxSymbols symbols;
  std::vector<ComplexField> f_weight;
  std::vector<ComplexField> lin_weight;

  explicit Cache(const PeriodicGrid& grid) : symbols(grid) {}
};

LinearOperatorHandle::LinearOperatorHandle(OperatorKind kind,
                                           std::shared_ptr<const KahlerStructure> structure,
                                           std::optional<HermitianFormField> alpha, double scale,
                                           bool mean_zero)
    : kind_(kind),
      structure_(std::move(structure)),
      alpha_(std::move(alpha)),
      scale_(scale),
      mean_zero_(mean_zero) {
  if (!structure_) throw StructuralError("operator needs a Kähler structure");
  if (kind_ != OperatorKind::lichnerowicz && !alpha_)
    throw StructuralError("operator kind requires a twist form");
  if (alpha_ && alpha_->grid() != structure_->grid())
    throw StructuralError("twist form and metric live on different grids");
  if (scale_ < 0.0 || !std::isfinite(scale_)) throw DomainError("scale R must be finite and >= 0");

  auto cache = std::make_shared<Cache>(structure_->grid());
  if (kind_ == OperatorKind::F || kind_ == OperatorKind::shifted)
    cache->f_weight = f_flux_weight(*structure_, *alpha_);
  if (kind_ == OperatorKind::full_linearization)
    cache->lin_weight = linearization_weight(*structure_, *alpha_, scale_);
  cache_ = std::move(cache);

  const auto& grid = structure_->grid();
  const HMatrix g0 = structure_->g0();
  const auto s_omega = ddbar_symbol(grid, contraction_coefficients(g0));
  std::vector<double> s_alpha;
  if (alpha_) {
    const HMatrix g0inv = g0.inverse();
    s_alpha = ddbar_symbol(grid, (g0inv * constant_part_of(*alpha_) * g0inv).transpose());
  }
  flat_symbol_.resize(grid.points());
  for (std::size_t p = 0; p < grid.points(); ++p) {
    switch (kind_) {
      case OperatorKind::F:
        flat_symbol_[p] = s_alpha[p];
        break;
      case OperatorKind::lichnerowicz:
        flat_symbol_[p] = s_omega[p] * s_omega[p];
        break;
      case OperatorKind::full_linearization:
      case OperatorKind::shifted:
        flat_symbol_[p] = -s_omega[p] * s_omega[p] + scale_ * s_alpha[p];
        break;
    }
  }
}

const HermitianFormField& LinearOperatorHandle::alpha() const {
  if (!alpha_) throw StructuralError("operator has no twist form");
  return *alpha_;
}

ScalarField LinearOperatorHandle::apply(const ScalarField& phi) const {
  const KahlerStructure& k = *structure_;
  if (phi.grid() != k.grid()) throw StructuralError("field and operator live on different grids");
  const ScalarField in = mean_zero_ ? project_mean_zero(k, phi) : phi;
  ScalarField out(k.grid());
  switch (kind_) {
    case OperatorKind::F:
      out = flux_F(k, cache_->symbols, cache_->f_weight, in);
      break;
    case OperatorKind::lichnerowicz:
      out = flux_lichnerowicz(k, cache_->symbols, in);
      break;
    case OperatorKind::full_linearization:
      out = pointwise_linearization(k, cache_->lin_weight, in);
      break;
    case OperatorKind::shifted:
      out = flux_F(k, cache_->symbols, cache_->f_weight, in) * scale_ -
            flux_lichnerowicz(k, cache_->symbols, in);
      break;
  }
  return mean_zero_ ? project_mean_zero(k, out) : out;
}

// ---------------------------------------------------------------------------

ScalarField apply_F(const KahlerStructure& k, const HermitianFormField& alpha,
                    const ScalarField& phi) {
  return flux_F(k, FluxSymbols(k.grid()), f_flux_weight(k, alpha), phi);
}

ScalarField apply_F_pointwise(const KahlerStructure& k, const HermitianFormField& alpha,
                              const ScalarField& phi) {
  const auto ddbar_phi = HermitianFormField::closed(HMatrix::Zero(k.dim(), k.dim()), phi);
  return form_pairing(k, alpha, ddbar_phi) + gradient_pairing(k, trace_form(k, alpha), phi);
}

ScalarField apply_lichnerowicz(const KahlerStructure& k, const ScalarField& phi) {
  return flux_lichnerowicz(k, FluxSymbols(k.grid()), phi);
}

ScalarField apply_lichnerowicz_pointwise(const KahlerStructure& k, const ScalarField& phi) {
  const auto ddbar_phi = HermitianFormField::closed(HMatrix::Zero(k.dim(), k.dim()), phi);
  return laplacian(k, laplacian(k, phi)) + form_pairing(k, ricci_form(k), ddbar_phi) +
         gradient_pairing(k, scalar_curvature(k), phi);
}

ScalarField apply_full_linearization(const KahlerStructure& k, const HermitianFormField& alpha,
                                     double R, const ScalarField& psi) {
  return pointwise_linearization(k, linearization_weight(k, alpha, R), psi);
}

ScalarField apply_shifted(const KahlerStructure& k, const HermitianFormField& alpha, double R,
                          const ScalarField& phi) {
  const FluxSymbols sym(k.grid());
  return flux_F(k, sym, f_flux_weight(k, alpha), phi) * R - flux_lichnerowicz(k, sym, phi);
}

ScalarField xi_norm2(const KahlerStructure& k, const HermitianFormField& alpha,
                     const ScalarField& phi) {
  const int n = k.dim();
  const auto b = flux_dbar_all(FluxSymbols(k.grid()), to_complex(phi));
  ScalarField out(k.grid());
  for (std::size_t p = 0; p < out.size(); ++p) {
    std::vector<cplx> xi(static_cast<std::size_t>(n), 0.0);
    for (int j = 0; j < n; ++j)
      for (int l = 0; l < n; ++l) xi[j] += k.inverse_component(l, j)[p] * b[l][p];
    cplx s = 0.0;
    for (int j = 0; j < n; ++j)
      for (int l = 0; l < n; ++l) s += alpha.component(j, l)[p] * xi[j] * std::conj(xi[l]);
    out[p] = s.real();
  }
  return out;
}

Eigen::MatrixXd dense_assemble(const LinearOperatorHandle& op) {
  const std::size_t points = op.grid().points();
  if (points > kDenseLimit)
    throw RefusalError("dense assembly refused: " + std::to_string(points) + " points exceeds " +
                       std::to_string(kDenseLimit));
  const auto size = static_cast<Eigen::Index>(points);
  Eigen::MatrixXd m(size, size);
  ScalarField e(op.grid());
  for (std::size_t col = 0; col < points; ++col) {
    e[col] = 1.0;
    const auto column = op.apply(e);
    e[col] = 0.0;
    for (std::size_t row = 0; row < points; ++row)
      m(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(col)) = column[row];
  }
  return m;
}

}  // namespace twistk
