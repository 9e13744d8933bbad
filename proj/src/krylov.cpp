#include "twistk/krylov.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <string>

#include <Eigen/Dense>

namespace twistk {

void KrylovConfig::validate() const {
  if (!(tolerance > 0.0 && tolerance <= 1e-2))
    throw DomainError("Krylov tolerance must lie in (0, 1e-2]");
  if (max_iterations < 1) throw DomainError("Krylov max_iterations must be >= 1");
  if (restart < 1) throw DomainError("GMRES restart length must be >= 1");
}

namespace {

std::shared_ptr<const KahlerStructure> borrow(const KahlerStructure& k) {
  return std::shared_ptr<const KahlerStructure>(std::shared_ptr<const void>(), &k);
}

std::vector<double> inverse_symbol(std::span<const double> symbol) {
  std::vector<double> inv(symbol.size(), 0.0);
  double scale = 0.0;
  for (double s : symbol) scale = std::max(scale, std::abs(s));
  for (std::size_t p = 0; p < symbol.size(); ++p)
    if (std::abs(symbol[p]) > 1e-14 * scale) inv[p] = 1.0 / symbol[p];
  return inv;
}

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

ScalarField remove_euclidean_mean(ScalarField f) {
  f += -euclidean_mean(f);
  return f;
}

void check_mean_zero(const KahlerStructure& k, const ScalarField& f, const char* who) {
  const double mean = volume_average(k, f);
  if (std::abs(mean) > 1e-8 * std::max(sup_norm(f), 1e-300))
    throw SolvabilityError(std::string(who) + ": right-hand side has omega-volume mean " +
                           sci(mean));
}

KrylovResult zero_result(const PeriodicGrid& grid) { return {ScalarField(grid), 0, {}}; }

// The solvers work with negative semidefinite operators; D*D is flipped.
struct NegativeForm {
  LinearMap apply;
  std::vector<double> symbol;
  double sign;
};

NegativeForm negative_form(const LinearOperatorHandle& op) {
  const double sign = op.kind() == OperatorKind::lichnerowicz ? -1.0 : 1.0;
  std::vector<double> symbol = op.flat_symbol();
  for (double& v : symbol) v *= sign;
  return {[&op, sign](const ScalarField& x) { return op.apply(x) * sign; }, std::move(symbol), sign};
}

}  // namespace

KrylovResult solve_self_adjoint(const KahlerStructure& k, const LinearMap& apply,
                                std::span<const double> symbol, const ScalarField& f,
                                const KrylovConfig& cfg, const ScalarField* guess) {
  cfg.validate();
  const PeriodicGrid& grid = k.grid();
  const double fnorm = l2_norm(f);
  if (fnorm == 0.0) return zero_result(grid);

  const ScalarField& w = k.det();
  ScalarField sqrt_w(grid), inv_w(grid), inv_sqrt_w(grid);
  for (std::size_t p = 0; p < w.size(); ++p) {
    sqrt_w[p] = std::sqrt(w[p]);
    inv_w[p] = 1.0 / w[p];
    inv_sqrt_w[p] = 1.0 / sqrt_w[p];
  }
  const bool precondition = cfg.preconditioner != PreconditionerKind::none && !symbol.empty();
  std::vector<double> inv_sym;
  if (precondition) {
    inv_sym = inverse_symbol(symbol);
    for (double& v : inv_sym) v = -v;  // -A is the positive operator
  }

  // S = -W A, b = -W f, M = W^{-1/2} (-A0)^{-1} W^{-1/2}.
  auto S = [&](const ScalarField& x) { return -hadamard(w, apply(x)); };
  auto M = [&](const ScalarField& r) {
    if (!precondition) return r;
    return hadamard(inv_sqrt_w, apply_multiplier(hadamard(inv_sqrt_w, r), inv_sym));
  };
  auto true_residual = [&](const ScalarField& x) { return l2_norm(apply(x) - f) / fnorm; };

  ScalarField x = guess ? project_mean_zero(k, *guess) : ScalarField(grid);
  const ScalarField b = -hadamard(w, f);
  ScalarField r = b - S(x);
  ScalarField z = M(r);
  ScalarField p = z;
  double rz = dot(r, z);

  KrylovResult result{x, 0, {}};
  for (int it = 1; it <= cfg.max_iterations; ++it) {
    const ScalarField q = S(p);
    const double pq = dot(p, q);
    const bool breakdown = !(pq > 0.0);
    if (!breakdown) {
      const double a = rz / pq;
      x += p * a;
      r -= q * a;
      x = project_mean_zero(k, x);
    }
    result.history.push_back(l2_norm(hadamard(inv_w, r)) / fnorm);
    result.iterations = it;
    if (result.history.back() <= cfg.tolerance || breakdown) {
      // Confirm with the true residual; on drift restart from it.
      const double t = true_residual(x);
      result.history.back() = t;
      if (t <= cfg.tolerance) {
        result.solution = std::move(x);
        return result;
      }
      if (breakdown) break;
      r = b - S(x);
      z = M(r);
      p = z;
      rz = dot(r, z);
      continue;
    }
    z = M(r);
    const double rz_new = dot(r, z);
    p = z + p * (rz_new / rz);
    rz = rz_new;
  }
  throw IterationLimitError("conjugate gradient did not reach relative residual " +
                                sci(cfg.tolerance) + " (last " +
                                sci(result.history.empty() ? 1.0 : result.history.back()) +
                                ")",
                            result.history);
}

KrylovResult solve_general(const KahlerStructure& k, const LinearMap& apply,
                           std::span<const double> symbol, const ScalarField& f,
                           const KrylovConfig& cfg, const ScalarField* guess,
                           bool project_range) {
  cfg.validate();
  const PeriodicGrid& grid = k.grid();
  const ScalarField rhs = remove_euclidean_mean(f);
  const double fnorm = l2_norm(f);
  if (fnorm == 0.0) return zero_result(grid);

  const bool precondition = cfg.preconditioner != PreconditionerKind::none && !symbol.empty();
  const std::vector<double> inv_sym = precondition ? inverse_symbol(symbol) : std::vector<double>{};
  auto P = [&](const ScalarField& v) {
    return precondition ? remove_euclidean_mean(apply_multiplier(v, inv_sym)) : v;
  };
  auto A = [&](const ScalarField& v) { return remove_euclidean_mean(apply(v)); };

  ScalarField x = guess ? remove_euclidean_mean(*guess) : ScalarField(grid);
  KrylovResult result{x, 0, {}};
  const int m = cfg.restart;
  const double sqrt_points = std::sqrt(static_cast<double>(grid.points()));
  double last_true = std::numeric_limits<double>::infinity();

  while (result.iterations < cfg.max_iterations) {
    ScalarField r = rhs - A(x);
    const ScalarField miss = apply(x) - f;
    const double true_rel = l2_norm(project_range ? remove_euclidean_mean(miss) : miss) / fnorm;
    if (!result.history.empty()) result.history.back() = true_rel;
    if (true_rel <= cfg.tolerance) {
      result.solution = project_mean_zero(k, x);
      return result;
    }
    if (true_rel >= 0.999 * last_true) break;  // restart made no progress
    last_true = true_rel;

    const double beta = std::sqrt(dot(r, r));
    std::vector<ScalarField> V{r * (1.0 / beta)}, Z;
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(m + 1, m);
    Eigen::VectorXd g = Eigen::VectorXd::Zero(m + 1), cs(m), sn(m);
    g(0) = beta;
    int j = 0;
    for (; j < m && result.iterations < cfg.max_iterations; ++j) {
      Z.push_back(P(V[j]));
      ScalarField wv = A(Z[j]);
      for (int i = 0; i <= j; ++i) {
        H(i, j) = dot(wv, V[i]);
        wv -= V[i] * H(i, j);
      }
      const double hnext = std::sqrt(dot(wv, wv));
      H(j + 1, j) = hnext;
      for (int i = 0; i < j; ++i) {
        const double t = cs(i) * H(i, j) + sn(i) * H(i + 1, j);
        H(i + 1, j) = -sn(i) * H(i, j) + cs(i) * H(i + 1, j);
        H(i, j) = t;
      }
      const double d = std::hypot(H(j, j), H(j + 1, j));
      cs(j) = H(j, j) / d;
      sn(j) = H(j + 1, j) / d;
      H(j, j) = d;
      H(j + 1, j) = 0.0;
      g(j + 1) = -sn(j) * g(j);
      g(j) = cs(j) * g(j);
      ++result.iterations;
      const double est = std::abs(g(j + 1)) / sqrt_points / fnorm;
      result.history.push_back(est);
      if (est <= 0.5 * cfg.tolerance || hnext == 0.0) {
        ++j;
        break;
      }
      V.push_back(wv * (1.0 / hnext));
    }
    const Eigen::VectorXd y =
        H.topLeftCorner(j, j).triangularView<Eigen::Upper>().solve(g.head(j));
    for (int i = 0; i < j; ++i) x += Z[i] * y(i);
  }
  throw IterationLimitError("GMRES did not reach relative residual " +
                                sci(cfg.tolerance) + " (last " +
                                sci(result.history.empty() ? 1.0 : result.history.back()) +
                                ")",
                            result.history);
}

ScalarField solve_F(const KahlerStructure& k, const HermitianFormField& alpha, const ScalarField& f,
                    const KrylovConfig& cfg) {
  const auto trace = trace_form(k, alpha);
  const double spread = sup_norm(trace - ScalarField(k.grid(), euclidean_mean(trace)));
  if (spread > 1e-8)
    throw PreconditionError("solve_F needs Lambda_omega alpha constant; sup deviation is " +
                            sci(spread));
  check_mean_zero(k, f, "solve_F");
  const LinearOperatorHandle op(OperatorKind::F, borrow(k), alpha);
  return solve_self_adjoint(k, [&](const ScalarField& x) { return op.apply(x); },
                            op.flat_symbol(), f, cfg)
      .solution;
}

ScalarField green_solve(const KahlerStructure& k, const ScalarField& f, const KrylovConfig& cfg) {
  check_mean_zero(k, f, "green_solve");
  const auto symbol = ddbar_symbol(k.grid(), contraction_coefficients(k.g0()));
  return solve_general(k, [&](const ScalarField& x) { return laplacian(k, x); }, symbol, f, cfg)
      .solution;
}

ScalarField solve_shifted(const KahlerStructure& k, const HermitianFormField& alpha, double R,
                          const ScalarField& f, const KrylovConfig& cfg) {
  if (!(R > 0.0)) throw DomainError("solve_shifted needs R > 0");
  check_mean_zero(k, f, "solve_shifted");
  const LinearOperatorHandle op(OperatorKind::shifted, borrow(k), alpha, R);
  return solve_self_adjoint(k, [&](const ScalarField& x) { return op.apply(x); },
                            op.flat_symbol(), f, cfg)
      .solution;
}

KrylovResult solve_linearization(const KahlerStructure& k, const HermitianFormField& alpha,
                                 double R, const ScalarField& f, const KrylovConfig& cfg) {
  const LinearOperatorHandle op(OperatorKind::full_linearization, borrow(k), alpha, R);
  return solve_general(k, [&](const ScalarField& x) { return op.apply(x); }, op.flat_symbol(), f,
                       cfg, nullptr, true);
}

// ---------------------------------------------------------------------------

ScalarField random_smooth_field(const PeriodicGrid& grid, std::uint64_t seed, int kmax) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  SpectralCoeffs c{grid, std::vector<cplx>(grid.points(), 0.0)};
  for (std::size_t p = 0; p < grid.points(); ++p) {
    bool inside = true;
    for (int a = 0; a < grid.axes(); ++a)
      if (std::abs(grid.wavenumber(p, a)) > kmax) inside = false;
    if (!inside) continue;
    const double re = normal(rng);
    const double im = normal(rng);
    c.coeffs[p] = cplx(re, im) / (1.0 + grid.wavenumber_norm2(p));
  }
  return remove_euclidean_mean(inverse_transform_real(c));
}

namespace {

// W-orthonormal basis of span(z) (dropping near-dependent directions); the
// same combinations are applied to az so that az keeps representing A z.
void w_orthonormalize(const KahlerStructure& k, std::vector<ScalarField>& z,
                      std::vector<ScalarField>& az) {
  const auto b = static_cast<Eigen::Index>(z.size());
  Eigen::MatrixXd gram(b, b);
  for (Eigen::Index i = 0; i < b; ++i)
    for (Eigen::Index j = 0; j <= i; ++j) gram(i, j) = gram(j, i) = volume_inner(k, z[i], z[j]);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
  const double top = eig.eigenvalues().maxCoeff();
  std::vector<ScalarField> q, aq;
  for (Eigen::Index c = b - 1; c >= 0; --c) {
    const double e = eig.eigenvalues()(c);
    if (e <= 1e-13 * top) continue;
    ScalarField v(k.grid()), av(k.grid());
    for (Eigen::Index i = 0; i < b; ++i) {
      const double coef = eig.eigenvectors()(i, c) / std::sqrt(e);
      v += z[i] * coef;
      av += az[i] * coef;
    }
    q.push_back(std::move(v));
    aq.push_back(std::move(av));
  }
  z = std::move(q);
  az = std::move(aq);
}

}  // namespace

EigenEstimate extreme_eigenvalue(const LinearOperatorHandle& op, const EigenConfig& cfg) {
  if (!op.self_adjoint()) throw PreconditionError("extreme_eigenvalue needs a self-adjoint operator");
  if (cfg.block < 1 || cfg.max_iterations < 1) throw DomainError("eigen block and iterations must be >= 1");
  const KahlerStructure& k = op.structure();
  const PeriodicGrid& grid = op.grid();
  const auto neg = negative_form(op);
  const auto& A = neg.apply;

  std::vector<ScalarField> y;
  for (int i = 0; i < cfg.block; ++i)
    y.push_back(project_mean_zero(k, random_smooth_field(grid, cfg.seed * 1000003ULL + i, 4)));

  EigenEstimate best{0.0, ScalarField(grid), 0.0, 0, false};
  for (int it = 1; it <= cfg.max_iterations; ++it) {
    // z = A^{-1} y, so A z = y.
    std::vector<ScalarField> z, az;
    for (auto& v : y) {
      v = project_mean_zero(k, v);
      z.push_back(solve_self_adjoint(k, A, neg.symbol, v, cfg.inner).solution);
      az.push_back(v);
    }
    w_orthonormalize(k, z, az);
    const auto b = static_cast<Eigen::Index>(z.size());
    Eigen::MatrixXd h(b, b);
    for (Eigen::Index i = 0; i < b; ++i)
      for (Eigen::Index j = 0; j < b; ++j) h(i, j) = volume_inner(k, z[i], az[j]);
    h = 0.5 * (h + h.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(h);

    // Ritz vectors, closest-to-zero eigenvalue first.
    std::vector<Eigen::Index> order(static_cast<std::size_t>(b));
    for (Eigen::Index i = 0; i < b; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index c) {
      return std::abs(eig.eigenvalues()(a)) < std::abs(eig.eigenvalues()(c));
    });
    y.clear();
    for (Eigen::Index c : order) {
      ScalarField v(grid);
      for (Eigen::Index i = 0; i < b; ++i) v += z[i] * eig.eigenvectors()(i, c);
      y.push_back(std::move(v));
    }
    const double theta = eig.eigenvalues()(order.front());
    const ScalarField& v = y.front();
    const double resid = l2_norm(A(v) - v * theta) / l2_norm(v);
    best = EigenEstimate{neg.sign * theta, v, resid, it, resid <= cfg.tolerance};
    if (best.converged) break;
    while (static_cast<int>(y.size()) < cfg.block)
      y.push_back(random_smooth_field(grid, cfg.seed * 7919ULL + it * 31ULL + y.size(), 4));
  }
  return best;
}

InverseNormEstimate inverse_norm_estimate(const LinearOperatorHandle& op, const KrylovConfig& cfg,
                                          int iterations, std::uint64_t seed) {
  if (!op.self_adjoint()) throw PreconditionError("inverse_norm_estimate needs a self-adjoint operator");
  const KahlerStructure& k = op.structure();
  const PeriodicGrid& grid = op.grid();
  const auto neg = negative_form(op);
  auto P = [&](const ScalarField& f) {
    return solve_self_adjoint(k, neg.apply, neg.symbol, project_mean_zero(k, f), cfg).solution;
  };

  std::vector<double> lambda4(grid.points());
  for (std::size_t p = 0; p < grid.points(); ++p)
    lambda4[p] = std::pow(1.0 + grid.wavenumber_norm2(p), 4);
  ScalarField inv_w(grid);
  for (std::size_t p = 0; p < grid.points(); ++p) inv_w[p] = 1.0 / k.det()[p];

  ScalarField v = project_mean_zero(k, random_smooth_field(grid, seed, grid.sizes()[0] / 2 - 1));
  InverseNormEstimate est;
  for (int it = 1; it <= iterations; ++it) {
    v = v * (1.0 / sobolev_norm(v, 0.0));
    const ScalarField u = P(v);
    est.norm = std::max(est.norm, sobolev_norm(u, 4.0));
    est.iterations = it;
    // v <- P^T Lambda^2 P v with P^T = W P W^{-1}.
    const ScalarField y = remove_euclidean_mean(apply_multiplier(u, lambda4));
    v = project_mean_zero(k, hadamard(k.det(), P(hadamard(inv_w, y))));
  }
  return est;
}

}  // namespace twistk
