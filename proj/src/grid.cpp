#include "twistk/grid.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <mutex>
#include <numbers>

#include <fftw3.h>


namespace twistk {

namespace {

// The FFTW planner is not thread-safe; execution with new arrays is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

bool is_power_of_two(int v) { return v > 0 && (v & (v - 1)) == 0; }

fftw_complex* as_fftw(const cplx* p) {
  return reinterpret_cast<fftw_complex*>(const_cast<cplx*>(p));
}

}  // namespace

struct PeriodicGrid::Impl {
  int n = 0;
  std::vector<int> sizes;
  std::size_t points = 0;
  std::vector<std::size_t> strides;
  // wavenumbers[p * axes + a]
  std::vector<int> wavenumbers;
  std::vector<double> norm2;
  fftw_plan forward_plan = nullptr;
  fftw_plan inverse_plan = nullptr;

  ~Impl() {
    std::lock_guard lock(planner_mutex());
    if (forward_plan) fftw_destroy_plan(forward_plan);
    if (inverse_plan) fftw_destroy_plan(inverse_plan);
  }
};

PeriodicGrid::PeriodicGrid(int n, std::vector<int> sizes) {
  if (n != 1 && n != 2) throw StructuralError("complex dimension must be 1 or 2");
  if (static_cast<int>(sizes.size()) != 2 * n)
    throw StructuralError("expected " + std::to_string(2 * n) + " grid sizes, got " +
                          std::to_string(sizes.size()));
  for (int s : sizes)
    if (s < 8 || !is_power_of_two(s))
      throw StructuralError("grid sizes must be powers of two >= 8, got " + std::to_string(s));

  auto impl = std::make_shared<Impl>();
  impl->n = n;
  impl->sizes = std::move(sizes);
  const int axes = 2 * n;
  impl->points = 1;
  for (int s : impl->sizes) impl->points *= static_cast<std::size_t>(s);
  impl->strides.assign(axes, 1);
  for (int a = axes - 2; a >= 0; --a)
    impl->strides[a] = impl->strides[a + 1] * static_cast<std::size_t>(impl->sizes[a + 1]);

  impl->wavenumbers.resize(impl->points * axes);
  impl->norm2.resize(impl->points);
  for (std::size_t p = 0; p < impl->points; ++p) {
    double k2 = 0.0;
    for (int a = 0; a < axes; ++a) {
      const int size = impl->sizes[a];
      const int idx = static_cast<int>((p / impl->strides[a]) % static_cast<std::size_t>(size));
      const int k = idx < size / 2 ? idx : idx - size;
      impl->wavenumbers[p * axes + a] = k;
      k2 += static_cast<double>(k) * k;
    }
    impl->norm2[p] = k2;
  }

  {
    std::lock_guard lock(planner_mutex());
    std::vector<cplx> a(impl->points), b(impl->points);
    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    impl->forward_plan = fftw_plan_dft(axes, impl->sizes.data(), as_fftw(a.data()),
                                       as_fftw(b.data()), FFTW_FORWARD, flags);
    impl->inverse_plan = fftw_plan_dft(axes, impl->sizes.data(), as_fftw(a.data()),
                                       as_fftw(b.data()), FFTW_BACKWARD, flags);
  }
  if (!impl->forward_plan || !impl->inverse_plan)
    throw StructuralError("FFTW planning failed");
  impl_ = std::move(impl);
}

PeriodicGrid PeriodicGrid::uniform(int n, int size) {
  return PeriodicGrid(n, std::vector<int>(static_cast<std::size_t>(2 * n), size));
}

int PeriodicGrid::complex_dim() const noexcept { return impl_->n; }
const std::vector<int>& PeriodicGrid::sizes() const noexcept { return impl_->sizes; }
std::size_t PeriodicGrid::points() const noexcept { return impl_->points; }

double PeriodicGrid::coordinate(std::size_t point, int axis) const {
  const int size = impl_->sizes[axis];
  const auto idx = (point / impl_->strides[axis]) % static_cast<std::size_t>(size);
  return 2.0 * std::numbers::pi * static_cast<double>(idx) / size;
}

int PeriodicGrid::wavenumber(std::size_t point, int axis) const {
  return impl_->wavenumbers[point * static_cast<std::size_t>(axes()) + axis];
}

bool PeriodicGrid::is_nyquist(std::size_t point, int axis) const {
  return wavenumber(point, axis) == -impl_->sizes[axis] / 2;
}

double PeriodicGrid::wavenumber_norm2(std::size_t point) const { return impl_->norm2[point]; }

void PeriodicGrid::forward(std::span<const cplx> in, std::span<cplx> out) const {
  if (in.size() != points() || out.size() != points())
    throw StructuralError("transform buffer size mismatch");
  fftw_execute_dft(impl_->forward_plan, as_fftw(in.data()), as_fftw(out.data()));
  const double scale = 1.0 / static_cast<double>(points());
  for (auto& v : out) v *= scale;
}

void PeriodicGrid::inverse(std::span<const cplx> in, std::span<cplx> out) const {
  if (in.size() != points() || out.size() != points())
    throw StructuralError("transform buffer size mismatch");
  fftw_execute_dft(impl_->inverse_plan, as_fftw(in.data()), as_fftw(out.data()));
}

bool PeriodicGrid::operator==(const PeriodicGrid& other) const noexcept {
  if (impl_ == other.impl_) return true;
  return impl_->n == other.impl_->n && impl_->sizes == other.impl_->sizes;
}

// ---------------------------------------------------------------------------

ScalarField real_part(const ComplexField& f) {
  std::vector<double> v(f.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = f[i].real();
  return ScalarField(f.grid(), std::move(v));
}

ScalarField imag_part(const ComplexField& f) {
  std::vector<double> v(f.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = f[i].imag();
  return ScalarField(f.grid(), std::move(v));
}

ComplexField to_complex(const ScalarField& f) {
  std::vector<cplx> v(f.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = f[i];
  return ComplexField(f.grid(), std::move(v));
}

ScalarField hadamard(const ScalarField& a, const ScalarField& b) {
  a.check_same(b);
  ScalarField out(a.grid());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
  return out;
}

double sup_norm(const ScalarField& f) {
  double m = 0.0;
  for (double v : f.values()) m = std::max(m, std::abs(v));
  return m;
}

double sup_norm(const ComplexField& f) {
  double m = 0.0;
  for (const cplx& v : f.values()) m = std::max(m, std::abs(v));
  return m;
}

double l2_norm(const ScalarField& f) {
  double s = 0.0;
  for (double v : f.values()) s += v * v;
  return std::sqrt(s / static_cast<double>(f.size()));
}

double l2_norm(const ComplexField& f) {
  double s = 0.0;
  for (const cplx& v : f.values()) s += std::norm(v);
  return std::sqrt(s / static_cast<double>(f.size()));
}

double euclidean_mean(const ScalarField& f) {
  double s = 0.0;
  for (double v : f.values()) s += v;
  return s / static_cast<double>(f.size());
}

double dot(const ScalarField& a, const ScalarField& b) {
  a.check_same(b);
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// ---------------------------------------------------------------------------

namespace {

std::size_t negated_index(const PeriodicGrid& grid, std::size_t p) {
  std::size_t q = 0;
  std::size_t stride = 1;
  const auto& sizes = grid.sizes();
  for (int a = grid.axes() - 1; a >= 0; --a) {
    const int size = sizes[a];
    const int k = grid.wavenumber(p, a);
    const int idx = ((-k) % size + size) % size;
    q += static_cast<std::size_t>(idx) * stride;
    stride *= static_cast<std::size_t>(size);
  }
  return q;
}

}  // namespace

double SpectralCoeffs::hermitian_defect() const {
  double worst = 0.0;
  for (std::size_t p = 0; p < coeffs.size(); ++p)
    worst = std::max(worst, std::abs(coeffs[p] - std::conj(coeffs[negated_index(grid, p)])));
  return worst;
}

double SpectralCoeffs::l2_norm() const {
  double s = 0.0;
  for (const cplx& c : coeffs) s += std::norm(c);
  return std::sqrt(s);
}

SpectralCoeffs forward_transform(const ScalarField& f) {
  return forward_transform(to_complex(f));
}

SpectralCoeffs forward_transform(const ComplexField& f) {
  SpectralCoeffs out{f.grid(), std::vector<cplx>(f.size())};
  f.grid().forward(f.values(), out.coeffs);
  return out;
}

ComplexField inverse_transform(const SpectralCoeffs& c) {
  if (c.coeffs.size() != c.grid.points()) throw StructuralError("coefficient count mismatch");
  std::vector<cplx> v(c.coeffs.size());
  c.grid.inverse(c.coeffs, v);
  return ComplexField(c.grid, std::move(v));
}

ScalarField inverse_transform_real(const SpectralCoeffs& c) {
  return real_part(inverse_transform(c));
}

std::size_t coefficient_index(const PeriodicGrid& grid, std::span<const int> k) {
  if (static_cast<int>(k.size()) != grid.axes())
    throw StructuralError("wavenumber tuple has wrong length");
  std::size_t q = 0;
  for (int a = 0; a < grid.axes(); ++a) {
    const int size = grid.sizes()[a];
    q = q * static_cast<std::size_t>(size) + static_cast<std::size_t>(((k[a] % size) + size) % size);
  }
  return q;
}

double sobolev_norm(const ScalarField& f, double s) {
  const auto c = forward_transform(f);
  double acc = 0.0;
  for (std::size_t p = 0; p < c.coeffs.size(); ++p)
    acc += std::pow(1.0 + f.grid().wavenumber_norm2(p), s) * std::norm(c.coeffs[p]);
  return std::sqrt(acc);
}

ScalarField truncate_two_thirds(const ScalarField& f) {
  auto c = forward_transform(f);
  const auto& grid = f.grid();
  for (std::size_t p = 0; p < c.coeffs.size(); ++p)
    for (int a = 0; a < grid.axes(); ++a)
      if (3 * std::abs(grid.wavenumber(p, a)) > grid.sizes()[a]) {
        c.coeffs[p] = 0.0;
        break;
      }
  return inverse_transform_real(c);
}

// ---------------------------------------------------------------------------

namespace {

// (i k)^a with the Nyquist mode of odd powers removed.
cplx real_partial_symbol(int k, bool nyquist, int power) {
  if (power == 0) return 1.0;
  if (nyquist && power % 2 == 1) return 0.0;
  return std::pow(cplx(0.0, static_cast<double>(k)), power);
}

}  // namespace

std::vector<cplx> derivative_symbol(const PeriodicGrid& grid, const MultiIndex& which) {
  if (which.size() > 4)
    throw UnsupportedOrderError("Wirtinger derivatives of order " + std::to_string(which.size()) +
                                " are not supported (maximum 4)");
  const int n = grid.complex_dim();
  std::vector<int> holo(n, 0), anti(n, 0);
  for (const Partial& d : which) {
    if (d.index < 0 || d.index >= n)
      throw StructuralError("derivative index " + std::to_string(d.index) + " out of range");
    (d.kind == Wirtinger::dz ? holo : anti)[d.index] += 1;
  }

  // Per complex index: coefficients of X^a Y^(deg-a) in
  // 2^-deg (X - iY)^p (X + iY)^q, with X = d/dx_j and Y = d/dy_j.
  std::vector<std::vector<cplx>> poly(n);
  for (int j = 0; j < n; ++j) {
    std::vector<cplx> c{1.0};
    auto multiply = [&c](cplx ycoef) {
      std::vector<cplx> next(c.size() + 1, 0.0);
      for (std::size_t a = 0; a < c.size(); ++a) {
        next[a + 1] += 0.5 * c[a];
        next[a] += 0.5 * ycoef * c[a];
      }
      c = std::move(next);
    };
    for (int t = 0; t < holo[j]; ++t) multiply(cplx(0.0, -1.0));
    for (int t = 0; t < anti[j]; ++t) multiply(cplx(0.0, 1.0));
    poly[j] = std::move(c);
  }

  std::vector<cplx> symbol(grid.points());
  for (std::size_t p = 0; p < grid.points(); ++p) {
    cplx total = 1.0;
    for (int j = 0; j < n; ++j) {
      const int deg = static_cast<int>(poly[j].size()) - 1;
      if (deg == 0) continue;
      const int kx = grid.wavenumber(p, 2 * j);
      const int ky = grid.wavenumber(p, 2 * j + 1);
      const bool nx = grid.is_nyquist(p, 2 * j);
      const bool ny = grid.is_nyquist(p, 2 * j + 1);
      cplx s = 0.0;
      for (int a = 0; a <= deg; ++a)
        s += poly[j][a] * real_partial_symbol(kx, nx, a) * real_partial_symbol(ky, ny, deg - a);
      total *= s;
    }
    symbol[p] = total;
  }
  return symbol;
}

ComplexField complex_derivative(const SpectralCoeffs& c, const MultiIndex& which) {
  const auto symbol = derivative_symbol(c.grid, which);
  SpectralCoeffs d{c.grid, c.coeffs};
  for (std::size_t p = 0; p < symbol.size(); ++p) d.coeffs[p] *= symbol[p];
  return inverse_transform(d);
}

ComplexField complex_derivative(const ScalarField& f, const MultiIndex& which) {
  return complex_derivative(forward_transform(f), which);
}

std::vector<cplx> flux_symbol(const PeriodicGrid& grid, Wirtinger kind, int j) {
  if (j < 0 || j >= grid.complex_dim()) throw StructuralError("derivative index out of range");
  const double sign = kind == Wirtinger::dz ? -1.0 : 1.0;
  std::vector<cplx> symbol(grid.points());
  for (std::size_t p = 0; p < grid.points(); ++p) {
    const double kx = grid.wavenumber(p, 2 * j);
    const double ky = grid.wavenumber(p, 2 * j + 1);
    symbol[p] = cplx(0.0, 0.5) * cplx(kx, sign * ky);
  }
  return symbol;
}

namespace {

ComplexField apply_complex_multiplier(const ComplexField& f, const std::vector<cplx>& symbol) {
  auto c = forward_transform(f);
  for (std::size_t p = 0; p < symbol.size(); ++p) c.coeffs[p] *= symbol[p];
  return inverse_transform(c);
}

}  // namespace

ComplexField flux_dz(const ComplexField& f, int j) {
  return apply_complex_multiplier(f, flux_symbol(f.grid(), Wirtinger::dz, j));
}

ComplexField flux_dzbar(const ComplexField& f, int j) {
  return apply_complex_multiplier(f, flux_symbol(f.grid(), Wirtinger::dzbar, j));
}

std::vector<double> ddbar_symbol(const PeriodicGrid& grid, const HMatrix& coeffs) {
  const int n = grid.complex_dim();
  if (coeffs.rows() != n || coeffs.cols() != n)
    throw StructuralError("coefficient matrix does not match complex dimension");
  std::vector<cplx> acc(grid.points(), 0.0);
  for (int j = 0; j < n; ++j)
    for (int k = 0; k < n; ++k) {
      if (coeffs(j, k) == cplx(0.0)) continue;
      const auto s = derivative_symbol(grid, {dz(j), dzbar(k)});
      for (std::size_t p = 0; p < acc.size(); ++p) acc[p] += coeffs(j, k) * s[p];
    }
  std::vector<double> out(acc.size());
  for (std::size_t p = 0; p < acc.size(); ++p) out[p] = acc[p].real();
  return out;
}

ScalarField apply_multiplier(const ScalarField& f, std::span<const double> symbol) {
  auto c = forward_transform(f);
  if (symbol.size() != c.coeffs.size()) throw StructuralError("symbol size mismatch");
  for (std::size_t p = 0; p < symbol.size(); ++p) c.coeffs[p] *= symbol[p];
  return inverse_transform_real(c);
}

ScalarField flat_poisson_solve(const ScalarField& f, const HMatrix& g0) {
  const int n = f.grid().complex_dim();
  if (g0.rows() != n || g0.cols() != n)
    throw StructuralError("constant metric does not match complex dimension");
  if (hermitian_defect(g0) > 1e-12 || min_eigenvalue(g0) <= 0.0)
    throw DomainError("constant metric must be Hermitian positive definite");
  const double mean = euclidean_mean(f);
  if (std::abs(mean) > 1e-10 * std::max(sup_norm(f), 1e-300))
    throw SolvabilityError("flat Poisson right-hand side has nonzero mean " + std::to_string(mean));

  const auto symbol = ddbar_symbol(f.grid(), contraction_coefficients(g0));
  auto c = forward_transform(f);
  for (std::size_t p = 0; p < symbol.size(); ++p)
    c.coeffs[p] = p == 0 ? cplx(0.0) : c.coeffs[p] / symbol[p];
  return inverse_transform_real(c);
}

// ---------------------------------------------------------------------------

namespace {
constexpr char kFieldMagic[8] = {'T', 'W', 'I', 'S', 'T', 'K', 'F', '1'};
static_assert(std::endian::native == std::endian::little,
              "field files are written in host order, which must be little-endian");
}  // namespace

void write_field(const std::filesystem::path& path, const ScalarField& f) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw StructuralError("cannot open " + path.string() + " for writing");
  out.write(kFieldMagic, sizeof kFieldMagic);
  const std::int32_t n = f.grid().complex_dim();
  out.write(reinterpret_cast<const char*>(&n), sizeof n);
  for (int s : f.grid().sizes()) {
    const std::int32_t v = s;
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
  }
  out.write(reinterpret_cast<const char*>(f.values().data()),
            static_cast<std::streamsize>(f.size() * sizeof(double)));
  if (!out) throw StructuralError("failed writing " + path.string());
}

ScalarField read_field(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw StructuralError("cannot open " + path.string());
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kFieldMagic, sizeof magic) != 0)
    throw StructuralError(path.string() + " is not a field file");
  std::int32_t n = 0;
  in.read(reinterpret_cast<char*>(&n), sizeof n);
  if (!in || (n != 1 && n != 2)) throw StructuralError("bad complex dimension in " + path.string());
  std::vector<int> sizes(static_cast<std::size_t>(2 * n));
  for (auto& s : sizes) {
    std::int32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    s = v;
  }
  if (!in) throw StructuralError("truncated header in " + path.string());
  PeriodicGrid grid(n, sizes);
  std::vector<double> values(grid.points());
  in.read(reinterpret_cast<char*>(values.data()),
          static_cast<std::streamsize>(values.size() * sizeof(double)));
  if (!in) throw StructuralError("truncated payload in " + path.string());
  return ScalarField(grid, std::move(values));
}

}  // namespace twistk
