#pragma once

// Periodic grids on the flat torus [0, 2pi)^{2n}, spectral transforms and
// Wirtinger derivatives.
//
// Axes are ordered (x_1, y_1, x_2, y_2) with z_j = x_j + i y_j; the last axis
// varies fastest in the flat point index (row-major).

#include <complex>
#include <cstddef>
#include <filesystem>
#include <memory>
#include <span>
#include <vector>

#include "twistk/errors.hpp"
#include "twistk/hermitian.hpp"

namespace twistk {

class PeriodicGrid {
 public:
  /// n is the complex dimension (1 or 2); sizes holds 2n powers of two >= 8.
  PeriodicGrid(int n, std::vector<int> sizes);

  /// Same number of points along every real axis.
  static PeriodicGrid uniform(int n, int size);

  int complex_dim() const noexcept;
  int axes() const noexcept { return 2 * complex_dim(); }
  const std::vector<int>& sizes() const noexcept;
  std::size_t points() const noexcept;

  double coordinate(std::size_t point, int axis) const;
  /// Signed wavenumber in [-N/2, N/2 - 1] along the given axis.
  int wavenumber(std::size_t point, int axis) const;
  bool is_nyquist(std::size_t point, int axis) const;
  double wavenumber_norm2(std::size_t point) const;

  /// Normalized forward DFT: c_k = (1/N) sum_x f(x) e^{-i k.x}.
  void forward(std::span<const cplx> in, std::span<cplx> out) const;
  /// Inverse of forward: f(x) = sum_k c_k e^{i k.x}.
  void inverse(std::span<const cplx> in, std::span<cplx> out) const;

  bool operator==(const PeriodicGrid& other) const noexcept;
  bool operator!=(const PeriodicGrid& other) const noexcept { return !(*this == other); }

 private:
  struct Impl;
  std::shared_ptr<const Impl> impl_;
};

/// Samples of a field on a periodic grid. Value type; the grid handle is shared.
template <class T>
class Field {
 public:
  using value_type = T;

  explicit Field(PeriodicGrid grid, T value = T{})
      : grid_(std::move(grid)), values_(grid_.points(), value) {}

  Field(PeriodicGrid grid, std::vector<T> values)
      : grid_(std::move(grid)), values_(std::move(values)) {
    if (values_.size() != grid_.points())
      throw StructuralError("field size " + std::to_string(values_.size()) +
                            " does not match grid with " + std::to_string(grid_.points()) +
                            " points");
  }

  /// Samples f(x) where x is the coordinate vector of each point.
  template <class Fn>
  static Field from_function(const PeriodicGrid& grid, Fn&& fn) {
    std::vector<T> values(grid.points());
    std::vector<double> x(static_cast<std::size_t>(grid.axes()));
    for (std::size_t p = 0; p < grid.points(); ++p) {
      for (int a = 0; a < grid.axes(); ++a) x[a] = grid.coordinate(p, a);
      values[p] = static_cast<T>(fn(std::span<const double>(x)));
    }
    return Field(grid, std::move(values));
  }

  const PeriodicGrid& grid() const noexcept { return grid_; }
  std::size_t size() const noexcept { return values_.size(); }
  std::span<T> values() noexcept { return values_; }
  std::span<const T> values() const noexcept { return values_; }
  const std::vector<T>& data() const noexcept { return values_; }
  T& operator[](std::size_t i) { return values_[i]; }
  const T& operator[](std::size_t i) const { return values_[i]; }

  Field& operator+=(const Field& o) {
    check_same(o);
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += o.values_[i];
    return *this;
  }
  Field& operator-=(const Field& o) {
    check_same(o);
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= o.values_[i];
    return *this;
  }
  Field& operator*=(T s) {
    for (auto& v : values_) v *= s;
    return *this;
  }
  Field& operator+=(T s) {
    for (auto& v : values_) v += s;
    return *this;
  }

  friend Field operator+(Field a, const Field& b) { return a += b; }
  friend Field operator-(Field a, const Field& b) { return a -= b; }
  friend Field operator*(Field a, T s) { return a *= s; }
  friend Field operator*(T s, Field a) { return a *= s; }
  friend Field operator-(Field a) { return a *= T(-1); }

  void check_same(const Field& o) const {
    if (grid_ != o.grid_ || values_.size() != o.values_.size())
      throw StructuralError("fields live on different grids");
  }

 private:
  PeriodicGrid grid_;
  std::vector<T> values_;
};

using ScalarField = Field<double>;
using ComplexField = Field<cplx>;

ScalarField real_part(const ComplexField& f);
ScalarField imag_part(const ComplexField& f);
ComplexField to_complex(const ScalarField& f);
ScalarField hadamard(const ScalarField& a, const ScalarField& b);

double sup_norm(const ScalarField& f);
double sup_norm(const ComplexField& f);
/// Root-mean-square over grid points; equals the coefficient l2 norm (Parseval).
double l2_norm(const ScalarField& f);
double l2_norm(const ComplexField& f);
double euclidean_mean(const ScalarField& f);
/// Euclidean inner product sum_x a(x) b(x).
double dot(const ScalarField& a, const ScalarField& b);

/// Fourier coefficients of a field (normalized so a constant c maps to c at k = 0).
struct SpectralCoeffs {
  PeriodicGrid grid;
  std::vector<cplx> coeffs;

  /// max |c_k - conj(c_{-k})|.
  double hermitian_defect() const;
  double l2_norm() const;
};

SpectralCoeffs forward_transform(const ScalarField& f);
SpectralCoeffs forward_transform(const ComplexField& f);
ComplexField inverse_transform(const SpectralCoeffs& c);
/// Inverse transform keeping the real part (for coefficients of a real field).
ScalarField inverse_transform_real(const SpectralCoeffs& c);

/// Index of the coefficient for wavenumber k (one entry per axis, any sign).
std::size_t coefficient_index(const PeriodicGrid& grid, std::span<const int> k);

/// Sobolev-type spectral norm sqrt(sum (1 + |k|^2)^s |c_k|^2).
double sobolev_norm(const ScalarField& f, double s);

/// Zero every mode with |k_a| > N_a / 3 along some axis (2/3 rule).
ScalarField truncate_two_thirds(const ScalarField& f);

// ---------------------------------------------------------------------------
// Wirtinger derivatives

enum class Wirtinger { dz, dzbar };

struct Partial {
  Wirtinger kind;
  int index;  // j of z_j, zero-based
};

inline Partial dz(int j) { return {Wirtinger::dz, j}; }
inline Partial dzbar(int j) { return {Wirtinger::dzbar, j}; }

using MultiIndex = std::vector<Partial>;

/// Fourier symbol of a product of Wirtinger derivatives, expanded into real
/// partials. Nyquist modes of odd-order real partials are zeroed, so the
/// operator maps real fields to fields whose conjugate is the conjugated
/// operator applied to the same field (e.g. d_j dbar_k f is Hermitian in j,k).
std::vector<cplx> derivative_symbol(const PeriodicGrid& grid, const MultiIndex& which);

/// Spectral derivative of order <= 4.
ComplexField complex_derivative(const ScalarField& f, const MultiIndex& which);
ComplexField complex_derivative(const SpectralCoeffs& c, const MultiIndex& which);

/// First Wirtinger derivatives of complex fields keeping the Nyquist mode
/// (symbol i/2 (k_x -/+ i k_y) with k = -N/2 there). With this convention
/// the real adjoint of dzbar is exactly -dz, which the flux-form operators
/// rely on.
ComplexField flux_dz(const ComplexField& f, int j);
ComplexField flux_dzbar(const ComplexField& f, int j);
std::vector<cplx> flux_symbol(const PeriodicGrid& grid, Wirtinger kind, int j);

/// Symbol of the constant-coefficient operator sum_{jk} coeffs(j,k) d_j dbar_k.
/// Real when coeffs is Hermitian.
std::vector<double> ddbar_symbol(const PeriodicGrid& grid, const HMatrix& coeffs);

/// Solves sum_{jk} g0^{j kbar} d_j dbar_k u = f for mean-zero u.
ScalarField flat_poisson_solve(const ScalarField& f, const HMatrix& g0);

/// Applies a real Fourier multiplier (symbol indexed like the coefficients).
ScalarField apply_multiplier(const ScalarField& f, std::span<const double> symbol);

// ---------------------------------------------------------------------------
// Field files: 8-byte magic "TWISTKF1", int32 n, int32 sizes[2n], then the
// samples as little-endian float64 in row-major order.

void write_field(const std::filesystem::path& path, const ScalarField& f);
ScalarField read_field(const std::filesystem::path& path);

}  // namespace twistk
