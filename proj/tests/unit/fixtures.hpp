#pragma once

#include <cmath>
#include <memory>

#include "twistk/krylov.hpp"

namespace fixtures {

using namespace twistk;

inline HMatrix scalar_matrix(int n, double v) { return HMatrix::Identity(n, n) * cplx(v); }

inline HMatrix diag2(double a, double b) {
  HMatrix m = HMatrix::Zero(2, 2);
  m(0, 0) = a;
  m(1, 1) = b;
  return m;
}

/// Non-diagonal positive Hermitian 2x2 matrix.
inline HMatrix skew_metric() {
  HMatrix m(2, 2);
  m << cplx(1.2, 0.0), cplx(0.2, 0.1), cplx(0.2, -0.1), cplx(0.9, 0.0);
  return m;
}

inline ScalarField cos_x(const PeriodicGrid& g, double amp = 1.0) {
  return ScalarField::from_function(g, [amp](auto x) { return amp * std::cos(x[0]); });
}

inline ScalarField seed_potential(const PeriodicGrid& g, double amp = 0.3) {
  return ScalarField::from_function(g, [amp](auto x) { return amp * std::cos(x[0]) * std::cos(x[1]); });
}

/// Random smooth potential scaled so that sup |ddbar phi| stays well below g0.
inline ScalarField random_potential(const PeriodicGrid& g, std::uint64_t seed, double size = 0.15) {
  auto f = random_smooth_field(g, seed, 2);
  double top = 0.0;
  for (const auto& c : ddbar_components(f)) top = std::max(top, sup_norm(c));
  return f * (size / top);
}

inline std::shared_ptr<const KahlerStructure> share(KahlerStructure k) {
  return std::make_shared<const KahlerStructure>(std::move(k));
}

}  // namespace fixtures
