#include "twistk/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace twistk {

FDEstimate fd_directional_derivative(const NonlinearMap& map, const ScalarField& phi,
                                     const ScalarField& psi, std::vector<double> schedule) {
  if (schedule.empty()) throw DomainError("finite-difference schedule is empty");
  std::sort(schedule.begin(), schedule.end(), std::greater<>());

  std::vector<std::pair<double, ScalarField>> diffs;
  for (double eps : schedule) {
    try {
      const auto plus = map(phi + psi * eps);
      const auto minus = map(phi - psi * eps);
      diffs.emplace_back(eps, (plus - minus) * (0.5 / eps));
    } catch (const DegenerateMetricError&) {
      // step too large for this base; smaller steps follow
    }
  }
  if (diffs.empty()) throw DomainError("every finite-difference step degenerates the metric");
  if (diffs.size() == 1)
    return {diffs.front().second, std::numeric_limits<double>::infinity(), diffs.front().first};

  std::size_t best = 0;
  double best_err = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < diffs.size(); ++i) {
    const double scale = std::max(l2_norm(diffs[i + 1].second), 1e-300);
    const double err = l2_norm(diffs[i].second - diffs[i + 1].second) / scale;
    if (err < best_err) {
      best_err = err;
      best = i;
    }
  }
  const double q2 = std::pow(diffs[best].first / diffs[best + 1].first, 2);
  auto combined = (diffs[best + 1].second * q2 - diffs[best].second) * (1.0 / (q2 - 1.0));
  return {std::move(combined), best_err, diffs[best + 1].first};
}

NonlinearMap twisted_map(const HMatrix& g0, const HermitianFormField& alpha, double R) {
  return [g0, alpha, R](const ScalarField& phi) {
    const auto k = metric_from_potential(g0, phi);
    return scalar_curvature(k) - trace_form(k, alpha) * R;
  };
}

namespace {

Eigen::MatrixXd weighted_dense(const LinearOperatorHandle& op, double* defect) {
  Eigen::MatrixXd m = dense_assemble(op);
  const auto& w = op.structure().det();
  const Eigen::Index size = m.rows();
  for (Eigen::Index i = 0; i < size; ++i)
    for (Eigen::Index j = 0; j < size; ++j) m(i, j) *= std::sqrt(w[i] / w[j]);
  const double top = m.cwiseAbs().maxCoeff();
  *defect = top > 0.0 ? (m - m.transpose()).cwiseAbs().maxCoeff() / top : 0.0;
  return 0.5 * (m + m.transpose());
}

}  // namespace

SpectrumReport dense_spectrum(const LinearOperatorHandle& op) {
  SpectrumReport report;
  const Eigen::MatrixXd b = weighted_dense(op, &report.symmetry_defect);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(b, Eigen::EigenvaluesOnly);
  const auto& ev = eig.eigenvalues();
  report.eigenvalues.assign(ev.data(), ev.data() + ev.size());
  return report;
}

DefinitenessReport definiteness_certificate(const LinearOperatorHandle& op, double relative_margin) {
  DefinitenessReport report{};
  const Eigen::MatrixXd b = weighted_dense(op, &report.symmetry_defect);
  const auto& w = op.structure().det();
  const Eigen::Index size = b.rows();

  Eigen::VectorXd ones = Eigen::VectorXd::Ones(size);
  const Eigen::MatrixXd m = dense_assemble(op);
  report.constant_residual = (m * ones).norm() / std::max(m.norm(), 1e-300);

  Eigen::VectorXd u(size);
  for (Eigen::Index i = 0; i < size; ++i) u(i) = std::sqrt(w[i]);
  u.normalize();
  const double sigma = b.cwiseAbs().rowwise().sum().maxCoeff();
  report.margin = relative_margin * sigma;
  Eigen::MatrixXd c = -b + sigma * u * u.transpose();
  c.diagonal().array() -= report.margin;
  Eigen::LLT<Eigen::MatrixXd> llt(c);
  report.negative_definite_on_mean_zero = llt.info() == Eigen::Success;
  return report;
}

FitResult order_fit(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw StructuralError("fit samples have mismatched lengths");
  if (x.size() < 4) throw DomainError("order fit needs at least 4 samples");
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0) || !std::isfinite(x[i]) || !std::isfinite(y[i]))
      throw DomainError("order fit needs finite positive samples");
    lx.push_back(std::log(x[i]));
    ly.push_back(std::log(y[i]));
  }
  std::vector<double> sorted = lx;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw DomainError("order fit needs distinct abscissae");

  const double n = static_cast<double>(lx.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    mx += lx[i] / n;
    my += ly[i] / n;
  }
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
  }
  FitResult fit{sxy / sxx, 0.0, 0.0, lx.size()};
  fit.intercept = my - fit.slope * mx;
  for (std::size_t i = 0; i < lx.size(); ++i)
    fit.max_deviation = std::max(fit.max_deviation, std::abs(ly[i] - fit.slope * lx[i] - fit.intercept));
  return fit;
}

ScalarField naive_form_pairing(const KahlerStructure& k, const HermitianFormField& a,
                               const HermitianFormField& b) {
  const int n = k.dim();
  ScalarField out(k.grid());
  for (std::size_t p = 0; p < out.size(); ++p) {
    // ginv(j,k) stores the matrix inverse; g^{j kbar} is its (k,j) entry.
    auto up = [&](int j, int l) { return k.inverse_component(l, j)[p]; };
    cplx s = 0.0;
    for (int j = 0; j < n; ++j)
      for (int kk = 0; kk < n; ++kk)
        for (int l = 0; l < n; ++l)
          for (int m = 0; m < n; ++m)
            s += up(j, l) * up(m, kk) * a.component(j, kk)[p] * b.component(m, l)[p];
    out[p] = s.real();
  }
  return out;
}

namespace {

ScalarField real_partial(const ScalarField& f, int axis) {
  auto c = forward_transform(f);
  const auto& g = f.grid();
  for (std::size_t p = 0; p < c.coeffs.size(); ++p)
    c.coeffs[p] *= g.is_nyquist(p, axis) ? cplx(0.0) : cplx(0.0, g.wavenumber(p, axis));
  return inverse_transform_real(c);
}

}  // namespace

ScalarField naive_gradient_pairing(const KahlerStructure& k, const ScalarField& f,
                                   const ScalarField& h) {
  const int n = k.dim();
  std::vector<ScalarField> fx, fy, hx, hy;
  for (int j = 0; j < n; ++j) {
    fx.push_back(real_partial(f, 2 * j));
    fy.push_back(real_partial(f, 2 * j + 1));
    hx.push_back(real_partial(h, 2 * j));
    hy.push_back(real_partial(h, 2 * j + 1));
  }
  ScalarField out(k.grid());
  for (std::size_t p = 0; p < out.size(); ++p) {
    cplx s = 0.0;
    for (int j = 0; j < n; ++j)
      for (int l = 0; l < n; ++l) {
        const cplx df = 0.5 * cplx(fx[j][p], -fy[j][p]);
        const cplx dbh = 0.5 * cplx(hx[l][p], hy[l][p]);
        s += k.inverse_component(l, j)[p] * df * dbh;
      }
    out[p] = s.real();
  }
  return out;
}

namespace {

double fd_partial(const std::function<double(std::span<const double>)>& fn,
                  std::vector<double>& x, const std::vector<int>& axes, std::size_t depth, double h) {
  if (depth == axes.size()) return fn(x);
  static constexpr double kWeights[4] = {1.0, -8.0, 8.0, -1.0};
  static constexpr double kOffsets[4] = {-2.0, -1.0, 1.0, 2.0};
  const int a = axes[depth];
  const double saved = x[a];
  double acc = 0.0;
  for (int s = 0; s < 4; ++s) {
    x[a] = saved + kOffsets[s] * h;
    acc += kWeights[s] * fd_partial(fn, x, axes, depth + 1, h);
  }
  x[a] = saved;
  return acc / (12.0 * h);
}

}  // namespace

cplx fd_wirtinger(const std::function<double(std::span<const double>)>& fn,
                  std::span<const double> x, const MultiIndex& which, double h) {
  if (which.size() > 2) throw UnsupportedOrderError("fd_wirtinger supports order <= 2");
  std::vector<double> point(x.begin(), x.end());
  // Expand each factor into (d_x -/+ i d_y) / 2 and sum over axis choices.
  cplx total = 0.0;
  const std::size_t terms = std::size_t{1} << which.size();
  for (std::size_t mask = 0; mask < terms; ++mask) {
    cplx coef = 1.0;
    std::vector<int> axes;
    for (std::size_t i = 0; i < which.size(); ++i) {
      const bool use_y = (mask >> i) & 1u;
      axes.push_back(2 * which[i].index + (use_y ? 1 : 0));
      const double sign = which[i].kind == Wirtinger::dz ? -1.0 : 1.0;
      coef *= use_y ? cplx(0.0, 0.5 * sign) : cplx(0.5);
    }
    total += coef * fd_partial(fn, point, axes, 0, h);
  }
  return total;
}

}  // namespace twistk
