#include "twistk/hermitian.hpp"

#include <algorithm>
#include <cmath>

#include "twistk/errors.hpp"

namespace twistk {

double min_eigenvalue(const HMatrix& h) {
  if (h.rows() == 1) return h(0, 0).real();
  if (h.rows() != 2) throw StructuralError("min_eigenvalue: only sizes 1 and 2 are supported");
  const double a = h(0, 0).real();
  const double d = h(1, 1).real();
  const double off = std::abs(h(0, 1));
  const double half_trace = 0.5 * (a + d);
  const double radius = std::hypot(0.5 * (a - d), off);
  return half_trace - radius;
}

double hermitian_defect(const HMatrix& h) {
  double worst = 0.0;
  for (int j = 0; j < h.rows(); ++j)
    for (int k = 0; k < h.cols(); ++k)
      worst = std::max(worst, std::abs(h(j, k) - std::conj(h(k, j))));
  return worst;
}

double hermitian_det(const HMatrix& h) {
  if (h.rows() == 1) return h(0, 0).real();
  return h(0, 0).real() * h(1, 1).real() - std::norm(h(0, 1));
}

HMatrix contraction_coefficients(const HMatrix& g) {
  return g.inverse().transpose();
}

}  // namespace twistk
