#pragma once

#include <complex>

#include <Eigen/Dense>

namespace twistk {

using cplx = std::complex<double>;

/// Small Hermitian matrix (complex dimension 1 or 2); fixed maximum size so
/// pointwise kernels never touch the heap.
using HMatrix = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, 0, 2, 2>;

inline HMatrix identity_matrix(int n) { return HMatrix::Identity(n, n); }

/// Smallest eigenvalue of a Hermitian matrix of size 1 or 2 (closed form).
double min_eigenvalue(const HMatrix& h);

/// Largest deviation from Hermitian symmetry, max |h_jk - conj(h_kj)|.
double hermitian_defect(const HMatrix& h);

/// Real determinant of a Hermitian matrix of size 1 or 2.
double hermitian_det(const HMatrix& h);

/// Coefficient array of the contraction with the inverse of g:
/// sum_{jk} M(j,k) a_{j kbar} equals tr(g^{-1} a). M is the transpose of g^{-1}.
HMatrix contraction_coefficients(const HMatrix& g);

}  // namespace twistk
