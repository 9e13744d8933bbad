#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "fixtures.hpp"
#include "twistk/oracle.hpp"

using namespace twistk;
using namespace fixtures;

namespace {

HermitianFormField twist_form(const PeriodicGrid& g, std::uint64_t seed) {
  if (g.complex_dim() == 1) return HermitianFormField::closed(scalar_matrix(1, 1.7), random_potential(g, seed, 0.4));
  HMatrix a0(2, 2);
  a0 << cplx(2.0, 0.0), cplx(0.3, -0.2), cplx(0.3, 0.2), cplx(1.5, 0.0);
  return HermitianFormField::closed(a0, random_potential(g, seed, 0.4));
}

KahlerStructure base(const PeriodicGrid& g, std::uint64_t seed) {
  const HMatrix g0 = g.complex_dim() == 1 ? scalar_matrix(1, 1.2) : skew_metric();
  return metric_from_potential(g0, random_potential(g, seed));
}

}  // namespace

TEST_CASE("F with alpha = omega is the Laplacian on band-limited data") {
  const auto g = PeriodicGrid::uniform(1, 16);
  const auto k = base(g, 1);
  const auto phi = random_smooth_field(g, 2, 3);
  CHECK(sup_norm(apply_F(k, k.metric(), phi) - laplacian(k, phi)) < 1e-10);

  // Potential modes <= 1, test modes <= 2: products stay below Nyquist on 8^4.
  const PeriodicGrid g2(2, {8, 8, 8, 8});
  auto pot = random_smooth_field(g2, 3, 1) * 0.05;
  const auto k2 = metric_from_potential(skew_metric(), pot);
  const auto phi2 = random_smooth_field(g2, 4, 2);
  CHECK(sup_norm(apply_F(k2, k2.metric(), phi2) - laplacian(k2, phi2)) < 1e-10);
}

TEST_CASE("flux and pointwise forms agree on resolved data") {
  const PeriodicGrid g(2, {16, 16, 16, 16});
  auto pot = random_smooth_field(g, 5, 1) * 0.05;
  const auto k = metric_from_potential(skew_metric(), pot);
  HMatrix a0(2, 2);
  a0 << cplx(2.0, 0.0), cplx(0.3, -0.2), cplx(0.3, 0.2), cplx(1.5, 0.0);
  const auto alpha = HermitianFormField::closed(a0, random_smooth_field(g, 6, 1) * 0.05);
  const auto phi = random_smooth_field(g, 7, 1);
  const auto flux = apply_F(k, alpha, phi);
  CHECK(sup_norm(flux - apply_F_pointwise(k, alpha, phi)) < 1e-6 * sup_norm(flux));
  const auto lich = apply_lichnerowicz(k, phi);
  CHECK(sup_norm(lich - apply_lichnerowicz_pointwise(k, phi)) < 1e-6 * sup_norm(lich));
}

TEST_CASE("operators annihilate constants") {
  for (const auto& g : {PeriodicGrid::uniform(1, 16), PeriodicGrid(2, {8, 8, 8, 8})}) {
    const auto k = base(g, 8);
    const auto alpha = twist_form(g, 9);
    const ScalarField one(g, 1.0);
    CHECK(sup_norm(apply_F(k, alpha, one)) < 1e-10);
    CHECK(sup_norm(apply_lichnerowicz(k, one)) < 1e-10);
    CHECK(sup_norm(apply_full_linearization(k, alpha, 7.0, one)) < 1e-10);
    CHECK(sup_norm(apply_shifted(k, alpha, 7.0, one)) < 1e-10);
  }
}

TEST_CASE("F integrates to zero when the trace of alpha is constant") {
  const auto g = PeriodicGrid::uniform(1, 16);
  const auto k = metric_from_potential(scalar_matrix(1, 1.0), seed_potential(g));
  const auto alpha = k.metric().scaled(2.0);
  const auto out = apply_F(k, alpha, random_smooth_field(g, 10, 4));
  CHECK(std::abs(volume_average(k, out)) < 1e-9 * sup_norm(out));
}

TEST_CASE("dense F is omega-self-adjoint on 8x8") {
  for (std::uint64_t seed = 11; seed < 16; ++seed) {
    const auto g = PeriodicGrid::uniform(1, 8);
    const LinearOperatorHandle op(OperatorKind::F, share(base(g, seed)), twist_form(g, seed + 100));
    const auto spec = dense_spectrum(op);
    CHECK(spec.symmetry_defect < 1e-9);
    const double top = std::abs(spec.eigenvalues.front());
    CHECK(std::abs(spec.eigenvalues.back()) < 1e-10 * top);
    CHECK(spec.eigenvalues[spec.eigenvalues.size() - 2] < -1e-6 * top);
  }
}

TEST_CASE("flat F with alpha = omega assembles to the flat Laplacian") {
  const auto g = PeriodicGrid::uniform(1, 8);
  const auto flat = share(flat_structure(g, scalar_matrix(1, 1.0)));
  const LinearOperatorHandle op(OperatorKind::F, flat, flat->metric());
  const auto m = dense_assemble(op);
  ScalarField e(g);
  double worst = 0.0;
  for (std::size_t c = 0; c < g.points(); ++c) {
    e[c] = 1.0;
    const auto col = laplacian(*flat, e);
    e[c] = 0.0;
    for (std::size_t r = 0; r < g.points(); ++r) worst = std::max(worst, std::abs(col[r] - m(r, c)));
  }
  CHECK(worst < 1e-13);
}

TEST_CASE("dense assembly refuses large grids") {
  const PeriodicGrid g(2, {8, 8, 8, 16});
  const auto flat = share(flat_structure(g, skew_metric()));
  const LinearOperatorHandle op(OperatorKind::lichnerowicz, flat, std::nullopt);
  CHECK_THROWS_AS(dense_assemble(op), RefusalError);
}

TEST_CASE("handle construction checks its inputs") {
  const auto g = PeriodicGrid::uniform(1, 8);
  const auto flat = share(flat_structure(g, scalar_matrix(1, 1.0)));
  CHECK_THROWS_AS(LinearOperatorHandle(OperatorKind::F, flat, std::nullopt), StructuralError);
  CHECK_THROWS_AS(LinearOperatorHandle(OperatorKind::shifted, flat, flat->metric(), -1.0), DomainError);
  CHECK_THROWS_AS(LinearOperatorHandle(OperatorKind::lichnerowicz, nullptr, std::nullopt), StructuralError);
  const auto other = PeriodicGrid::uniform(1, 16);
  CHECK_THROWS_AS(LinearOperatorHandle(OperatorKind::F, flat, HermitianFormField::constant(other, scalar_matrix(1, 1.0))),
                  StructuralError);
}

TEST_CASE("Lichnerowicz operator") {
  const auto g = PeriodicGrid::uniform(1, 16);
  const auto flat = flat_structure(g, scalar_matrix(1, 1.0));
  CHECK(sup_norm(apply_lichnerowicz(flat, cos_x(g)) - cos_x(g, 1.0 / 16.0)) < 1e-14);

  const auto g8 = PeriodicGrid::uniform(1, 8);
  const LinearOperatorHandle op(OperatorKind::lichnerowicz, share(base(g8, 17)), std::nullopt);
  const auto spec = dense_spectrum(op);
  CHECK(spec.symmetry_defect < 1e-8);
  const double top = spec.eigenvalues.back();
  CHECK(std::abs(spec.eigenvalues.front()) < 1e-8 * top);
  CHECK(spec.eigenvalues[1] > 1e-6 * top);
}

TEST_CASE("flat shifted operator spectrum") {
  const auto g = PeriodicGrid::uniform(1, 8);
  const auto flat = share(flat_structure(g, scalar_matrix(1, 1.0)));
  const double R = 10.0;
  const LinearOperatorHandle op(OperatorKind::shifted, flat, flat->metric(), R);
  const auto spec = dense_spectrum(op);
  std::vector<double> expect;
  for (std::size_t p = 0; p < g.points(); ++p) {
    const double k2 = g.wavenumber_norm2(p);
    expect.push_back(-(k2 / 4.0) * (k2 / 4.0) - R * k2 / 4.0);
  }
  std::sort(expect.begin(), expect.end());
  for (std::size_t i = 0; i < expect.size(); ++i)
    CHECK(spec.eigenvalues[i] == doctest::Approx(expect[i]).epsilon(1e-8).scale(1.0));
  // The handle's frozen symbol is the same list.
  std::vector<double> symbol = op.flat_symbol();
  std::sort(symbol.begin(), symbol.end());
  for (std::size_t i = 0; i < expect.size(); ++i) CHECK(symbol[i] == doctest::Approx(expect[i]));
}

TEST_CASE("quadratic form of F is minus the alpha-norm of xi") {
  for (const auto& g : {PeriodicGrid::uniform(1, 16), PeriodicGrid(2, {8, 8, 8, 8})}) {
    const auto k = base(g, 18);
    const auto alpha = twist_form(g, 19);
    const auto phi = random_smooth_field(g, 20, 3);
    const double lhs = volume_inner(k, phi, apply_F(k, alpha, phi));
    const double rhs = -volume_inner(k, xi_norm2(k, alpha, phi), ScalarField(g, 1.0));
    CHECK(lhs < 0.0);
    CHECK(std::abs(lhs - rhs) <= 1e-8 * std::abs(rhs));
    const auto psi = random_smooth_field(g, 21, 3);
    const double a = volume_inner(k, psi, apply_F(k, alpha, phi));
    const double b = volume_inner(k, phi, apply_F(k, alpha, psi));
    CHECK(std::abs(a - b) <= 1e-10 * std::abs(lhs));
  }
}

TEST_CASE("shifted operator is self-adjoint and negative") {
  for (const auto& g : {PeriodicGrid::uniform(1, 16), PeriodicGrid(2, {8, 8, 8, 8})}) {
    const auto k = base(g, 22);
    const auto alpha = twist_form(g, 23);
    for (double R : {0.5, 10.0, 100.0}) {
      const auto phi = random_smooth_field(g, 24, 4);
      const auto psi = random_smooth_field(g, 25, 4);
      const double a = volume_inner(k, psi, apply_shifted(k, alpha, R, phi));
      const double b = volume_inner(k, phi, apply_shifted(k, alpha, R, psi));
      CHECK(std::abs(a - b) <= 1e-8 * std::max(std::abs(a), 1.0));
      for (std::uint64_t s = 30; s < 35; ++s) {
        auto v = project_mean_zero(k, random_smooth_field(g, s, 4));
        v = v * (1.0 / std::sqrt(volume_inner(k, v, v)));
        CHECK(volume_inner(k, v, apply_shifted(k, alpha, R, v)) <= -1e-12);
      }
    }
  }
}

TEST_CASE("mean-zero handles project input and output") {
  const auto g = PeriodicGrid::uniform(1, 16);
  const auto k = share(base(g, 26));
  const auto alpha = twist_form(g, 27);
  const LinearOperatorHandle plain(OperatorKind::shifted, k, alpha, 3.0);
  const LinearOperatorHandle restricted(OperatorKind::shifted, k, alpha, 3.0, true);
  const auto phi = random_smooth_field(g, 28, 3) + ScalarField(g, 5.0);
  const auto out = restricted.apply(phi);
  CHECK(std::abs(volume_average(*k, out)) < 1e-14);
  CHECK(sup_norm(out - project_mean_zero(*k, plain.apply(phi))) < 1e-12);
}

TEST_CASE("full linearization") {
  const auto g = PeriodicGrid::uniform(1, 16);
  const auto flat = flat_structure(g, scalar_matrix(1, 1.0));
  const auto psi = random_smooth_field(g, 29, 3);
  const auto bilap = laplacian(flat, laplacian(flat, psi));
  CHECK(sup_norm(apply_full_linearization(flat, flat.metric(), 0.0, psi) + bilap) < 1e-13);

  for (const auto& grid : {PeriodicGrid::uniform(1, 16), PeriodicGrid(2, {8, 8, 8, 8})}) {
    const HMatrix g0 = grid.complex_dim() == 1 ? scalar_matrix(1, 1.2) : skew_metric();
    const auto phi = random_potential(grid, 40);
    const auto alpha = twist_form(grid, 41);
    const auto dir = random_smooth_field(grid, 42, 3);
    for (double R : {0.0, 3.0, 50.0}) {
      const auto fd = fd_directional_derivative(twisted_map(g0, alpha, R), phi, dir);
      const auto lin = apply_full_linearization(metric_from_potential(g0, phi), alpha, R, dir);
      CHECK(l2_norm(fd.derivative - lin) <= 1e-5 * l2_norm(lin));
    }
  }
}

TEST_CASE("xi norm is pointwise nonnegative for positive alpha") {
  const PeriodicGrid g(2, {8, 8, 8, 8});
  const auto k = base(g, 43);
  const auto alpha = twist_form(g, 44);
  const auto phi = random_smooth_field(g, 45, 2);
  const auto out = xi_norm2(k, alpha, phi);
  for (std::size_t p = 0; p < g.points(); ++p) CHECK(out[p] >= -1e-14);
}
