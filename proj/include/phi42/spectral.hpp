#pragma once

// Torus geometry, Fourier mode bookkeeping and transforms.
//
// Conventions (used by every other header):
//   * The torus is [0, L)^2 with 0 < L < 2*pi.
//   * A field is stored through the coefficients c_k, k in {-N..N}^2, of
//         f(z) = sum_k c_k exp(2 pi i k.z / L),
//     so a constant field c has c_0 = c. (In terms of the L^2 pairing,
//     c_k = L^{-2} <f, e_k>.)
//   * The Galerkin cutoff uses the sup-norm |k1| v |k2| <= N (square
//     Dirichlet kernel); eigenvalues use the Euclidean |k|^2 = k1^2 + k2^2
//     unless the grid is built with EigenNorm::sup.
//   * The collocation grid has M x M points z_ij = (i L/M, j L/M), M even,
//     M >= 4N + 2, so cubic products are alias-free on the retained modes.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <fftw3.h>

#include "phi42/error.hpp"

namespace phi42 {

using Complex = std::complex<double>;

enum class EigenNorm { euclidean, sup };

struct Mode {
  int k1 = 0;
  int k2 = 0;
  friend bool operator==(const Mode&, const Mode&) = default;
};

inline int sup_norm(Mode k) { return std::max(std::abs(k.k1), std::abs(k.k2)); }
inline int euclidean_norm_sq(Mode k) { return k.k1 * k.k1 + k.k2 * k.k2; }

namespace detail {

inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

// FFTW plans for one resolution M; executed through the new-array interface,
// which is thread-safe once the plans exist.
class FftPlans {
 public:
  explicit FftPlans(int m) : m_(m) {
    std::vector<double> real(static_cast<std::size_t>(m) * m);
    std::vector<Complex> half(static_cast<std::size_t>(m) * (m / 2 + 1));
    std::vector<Complex> full(static_cast<std::size_t>(m) * m);
    std::vector<Complex> full2(full.size());
    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    std::lock_guard lock(fftw_planner_mutex());
    r2c_ = fftw_plan_dft_r2c_2d(m, m, real.data(), as_fftw(half.data()), flags);
    c2r_ = fftw_plan_dft_c2r_2d(m, m, as_fftw(half.data()), real.data(), flags);
    c2c_ = fftw_plan_dft_2d(m, m, as_fftw(full.data()), as_fftw(full2.data()), FFTW_BACKWARD, flags);
    if (!r2c_ || !c2r_ || !c2c_) throw std::runtime_error("FFTW planning failed");
  }
  FftPlans(const FftPlans&) = delete;
  FftPlans& operator=(const FftPlans&) = delete;
  ~FftPlans() {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(r2c_);
    fftw_destroy_plan(c2r_);
    fftw_destroy_plan(c2c_);
  }

  // in is destroyed by FFTW.
  void forward(std::span<double> in, std::span<Complex> out) const {
    fftw_execute_dft_r2c(r2c_, in.data(), as_fftw(out.data()));
  }
  void backward(std::span<Complex> in, std::span<double> out) const {
    fftw_execute_dft_c2r(c2r_, as_fftw(in.data()), out.data());
  }
  void backward_complex(std::span<Complex> in, std::span<Complex> out) const {
    fftw_execute_dft(c2c_, as_fftw(in.data()), as_fftw(out.data()));
  }
  int resolution() const { return m_; }

  static fftw_complex* as_fftw(Complex* p) { return reinterpret_cast<fftw_complex*>(p); }

 private:
  int m_;
  fftw_plan r2c_ = nullptr;
  fftw_plan c2r_ = nullptr;
  fftw_plan c2c_ = nullptr;
};

inline std::shared_ptr<const FftPlans> plans_for(int m) {
  static std::mutex cache_mutex;
  static std::map<int, std::shared_ptr<const FftPlans>> cache;
  std::lock_guard lock(cache_mutex);
  auto& slot = cache[m];
  if (!slot) slot = std::make_shared<const FftPlans>(m);
  return slot;
}

inline bool is_five_smooth(int n) {
  for (int p : {2, 3, 5}) {
    while (n % p == 0) n /= p;
  }
  return n == 1;
}

}  // namespace detail

/// Immutable torus discretization; copies share one implementation.
class TorusGrid {
 public:
  TorusGrid(double length, int cutoff, int resolution = 0,
            EigenNorm eigen_norm = EigenNorm::euclidean) {
    require(length > 0.0 && length < 2.0 * std::numbers::pi,
            "torus length must satisfy 0 < L < 2*pi");
    require(cutoff >= 0, "Galerkin cutoff N must be nonnegative");
    if (resolution == 0) resolution = default_resolution(cutoff);
    require(resolution % 2 == 0, "collocation resolution M must be even");
    require(resolution >= 4 * cutoff + 2, "collocation resolution must satisfy M >= 4N + 2");

    auto impl = std::make_shared<Impl>();
    impl->length = length;
    impl->cutoff = cutoff;
    impl->resolution = resolution;
    impl->eigen_norm = eigen_norm;
    const int side = 2 * cutoff + 1;
    const double base = 2.0 * std::numbers::pi / length;
    impl->laplace.resize(static_cast<std::size_t>(side) * side);
    impl->frequency.resize(impl->laplace.size());
    for (int k1 = -cutoff; k1 <= cutoff; ++k1) {
      for (int k2 = -cutoff; k2 <= cutoff; ++k2) {
        const std::size_t i = static_cast<std::size_t>(k1 + cutoff) * side + (k2 + cutoff);
        const Mode k{k1, k2};
        const double norm_sq = eigen_norm == EigenNorm::euclidean
                                   ? static_cast<double>(euclidean_norm_sq(k))
                                   : static_cast<double>(sup_norm(k)) * sup_norm(k);
        impl->laplace[i] = base * base * norm_sq;
        impl->frequency[i] = base * std::sqrt(static_cast<double>(euclidean_norm_sq(k)));
      }
    }
    impl->plans = detail::plans_for(resolution);
    impl_ = std::move(impl);
  }

  /// Smallest even 5-smooth M with M >= 4N + 2.
  static int default_resolution(int cutoff) {
    int m = 4 * cutoff + 2;
    while (!detail::is_five_smooth(m)) m += 2;
    return m;
  }

  double length() const { return impl_->length; }
  int cutoff() const { return impl_->cutoff; }
  int resolution() const { return impl_->resolution; }
  EigenNorm eigen_norm() const { return impl_->eigen_norm; }
  int side() const { return 2 * impl_->cutoff + 1; }
  std::size_t mode_count() const { return impl_->laplace.size(); }
  std::size_t point_count() const {
    return static_cast<std::size_t>(resolution()) * static_cast<std::size_t>(resolution());
  }

  bool contains(Mode k) const { return sup_norm(k) <= cutoff(); }

  std::size_t index(Mode k) const {
    if (!contains(k)) {
      throw std::out_of_range("mode (" + std::to_string(k.k1) + "," + std::to_string(k.k2) +
                              ") outside cutoff " + std::to_string(cutoff()));
    }
    return static_cast<std::size_t>(k.k1 + cutoff()) * side() + (k.k2 + cutoff());
  }

  Mode mode(std::size_t index) const {
    const int s = side();
    return {static_cast<int>(index / s) - cutoff(), static_cast<int>(index % s) - cutoff()};
  }

  /// Symbol of -Delta at mode index i: (2 pi / L)^2 |k|^2.
  double laplace_symbol(std::size_t i) const { return impl_->laplace[i]; }
  std::span<const double> laplace_symbols() const { return impl_->laplace; }
  /// Euclidean angular frequency 2 pi |k|_2 / L (used by Littlewood-Paley blocks).
  double frequency(std::size_t i) const { return impl_->frequency[i]; }

  const detail::FftPlans& fft() const { return *impl_->plans; }

  friend bool operator==(const TorusGrid& a, const TorusGrid& b) {
    return a.impl_ == b.impl_ ||
           (a.length() == b.length() && a.cutoff() == b.cutoff() &&
            a.resolution() == b.resolution() && a.eigen_norm() == b.eigen_norm());
  }

 private:
  struct Impl {
    double length = 0.0;
    int cutoff = 0;
    int resolution = 0;
    EigenNorm eigen_norm = EigenNorm::euclidean;
    std::vector<double> laplace;
    std::vector<double> frequency;
    std::shared_ptr<const detail::FftPlans> plans;
  };
  std::shared_ptr<const Impl> impl_;
};

/// lambda_k = (2 pi |k| / L)^2 - 1, eigenvalue of -Delta - 1.
inline double eigenvalue_lambda(const TorusGrid& grid, Mode k) {
  return grid.laplace_symbol(grid.index(k)) - 1.0;
}

/// nu_k = lambda_k + 3, eigenvalue of -Delta + 2.
inline double eigenvalue_nu(const TorusGrid& grid, Mode k) {
  return eigenvalue_lambda(grid, k) + 3.0;
}

/// Values of a real field on the M x M collocation grid, row-major in z1.
struct CollocationField {
  int resolution = 0;
  double length = 0.0;
  std::vector<double> values;

  double& operator()(int i, int j) { return values[static_cast<std::size_t>(i) * resolution + j]; }
  double operator()(int i, int j) const {
    return values[static_cast<std::size_t>(i) * resolution + j];
  }
};

class SpectralField {
 public:
  explicit SpectralField(TorusGrid grid)
      : grid_(std::move(grid)), coeffs_(grid_.mode_count(), Complex{0.0, 0.0}) {}

  static SpectralField constant(const TorusGrid& grid, double c) {
    SpectralField f(grid);
    f.at({0, 0}) = c;
    return f;
  }

  /// amplitude * cos(2 pi k.z / L + phase)
  static SpectralField cosine(const TorusGrid& grid, Mode k, double amplitude, double phase = 0.0) {
    SpectralField f(grid);
    if (k == Mode{0, 0}) {
      f.at(k) = amplitude * std::cos(phase);
      return f;
    }
    const Complex half = 0.5 * amplitude * std::polar(1.0, phase);
    f.at(k) += half;
    f.at({-k.k1, -k.k2}) += std::conj(half);
    return f;
  }

  const TorusGrid& grid() const { return grid_; }
  std::span<Complex> coeffs() { return coeffs_; }
  std::span<const Complex> coeffs() const { return coeffs_; }
  std::size_t size() const { return coeffs_.size(); }

  Complex& at(Mode k) { return coeffs_[grid_.index(k)]; }
  const Complex& at(Mode k) const { return coeffs_[grid_.index(k)]; }
  Complex& operator[](std::size_t i) { return coeffs_[i]; }
  const Complex& operator[](std::size_t i) const { return coeffs_[i]; }

  /// coeff(-k) == conj(coeff(k)) within tol (absolute, relative to the largest coefficient).
  bool is_hermitian(double tol = 1e-12) const {
    const double scale = std::max(1.0, max_abs_coeff());
    for (std::size_t i = 0; i < coeffs_.size(); ++i) {
      const Mode k = grid_.mode(i);
      const Complex mirror = coeffs_[grid_.index({-k.k1, -k.k2})];
      if (std::abs(coeffs_[i] - std::conj(mirror)) > tol * scale) return false;
    }
    return true;
  }

  double max_abs_coeff() const {
    double m = 0.0;
    for (const Complex& c : coeffs_) m = std::max(m, std::abs(c));
    return m;
  }

  /// Squared L^2 norm, integral over the torus: L^2 sum |c_k|^2.
  double l2_norm_sq() const {
    double s = 0.0;
    for (const Complex& c : coeffs_) s += std::norm(c);
    return grid_.length() * grid_.length() * s;
  }

  SpectralField& operator+=(const SpectralField& other) {
    check_same_grid(other);
    for (std::size_t i = 0; i < coeffs_.size(); ++i) coeffs_[i] += other.coeffs_[i];
    return *this;
  }
  SpectralField& operator-=(const SpectralField& other) {
    check_same_grid(other);
    for (std::size_t i = 0; i < coeffs_.size(); ++i) coeffs_[i] -= other.coeffs_[i];
    return *this;
  }
  SpectralField& operator*=(double s) {
    for (Complex& c : coeffs_) c *= s;
    return *this;
  }
  /// Adds a constant (shifts the zero mode).
  SpectralField& operator+=(double c) {
    at({0, 0}) += c;
    return *this;
  }

  friend SpectralField operator+(SpectralField a, const SpectralField& b) { return a += b; }
  friend SpectralField operator-(SpectralField a, const SpectralField& b) { return a -= b; }
  friend SpectralField operator*(double s, SpectralField a) { return a *= s; }
  friend SpectralField operator*(SpectralField a, double s) { return a *= s; }
  friend SpectralField operator-(SpectralField a, double c) { return a += -c; }
  friend SpectralField operator+(SpectralField a, double c) { return a += c; }
  friend SpectralField operator-(SpectralField a) { return a *= -1.0; }

 private:
  void check_same_grid(const SpectralField& other) const {
    if (!(grid_ == other.grid_)) throw std::invalid_argument("fields live on different grids");
  }

  TorusGrid grid_;
  std::vector<Complex> coeffs_;
};

/// L^2 pairing <f, g> = integral f conj(g) over the torus.
inline Complex inner_product(const SpectralField& f, const SpectralField& g) {
  if (!(f.grid() == g.grid())) throw std::invalid_argument("fields live on different grids");
  Complex s{0.0, 0.0};
  for (std::size_t i = 0; i < f.size(); ++i) s += f[i] * std::conj(g[i]);
  const double l = f.grid().length();
  return l * l * s;
}

/// Galerkin projection onto |k1| v |k2| <= cutoff.
inline SpectralField project(SpectralField f, int cutoff) {
  require(cutoff >= 0 && cutoff <= f.grid().cutoff(), "projection cutoff must lie in [0, N]");
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (sup_norm(f.grid().mode(i)) > cutoff) f[i] = 0.0;
  }
  return f;
}

/// Copies the modes shared by both grids into a field on `target`.
inline SpectralField resample(const SpectralField& f, const TorusGrid& target) {
  require(f.grid().length() == target.length(), "resample requires equal torus lengths");
  SpectralField out(target);
  const int n = std::min(f.grid().cutoff(), target.cutoff());
  for (int k1 = -n; k1 <= n; ++k1) {
    for (int k2 = -n; k2 <= n; ++k2) out.at({k1, k2}) = f.at({k1, k2});
  }
  return out;
}

/// Spatial mean L^{-2} <f, 1>, i.e. the zero-mode coefficient.
inline double field_mean(const SpectralField& f) { return f.at({0, 0}).real(); }

namespace detail {

inline std::size_t half_index(int m, int k1, int k2) {
  const int row = ((k1 % m) + m) % m;
  return static_cast<std::size_t>(row) * (m / 2 + 1) + k2;
}

}  // namespace detail

/// Evaluates a real (Hermitian) field on the collocation grid.
inline CollocationField to_physical(const SpectralField& f) {
  const TorusGrid& grid = f.grid();
  const int m = grid.resolution();
  const int n = grid.cutoff();
  std::vector<Complex> half(static_cast<std::size_t>(m) * (m / 2 + 1), Complex{0.0, 0.0});
  for (int k1 = -n; k1 <= n; ++k1) {
    for (int k2 = 0; k2 <= n; ++k2) half[detail::half_index(m, k1, k2)] = f.at({k1, k2});
  }
  CollocationField out{m, grid.length(), std::vector<double>(grid.point_count())};
  grid.fft().backward(half, out.values);
  return out;
}

/// Full complex evaluation; the imaginary part measures loss of Hermitian symmetry.
inline std::vector<Complex> to_physical_complex(const SpectralField& f) {
  const TorusGrid& grid = f.grid();
  const int m = grid.resolution();
  const int n = grid.cutoff();
  std::vector<Complex> in(grid.point_count(), Complex{0.0, 0.0});
  for (int k1 = -n; k1 <= n; ++k1) {
    for (int k2 = -n; k2 <= n; ++k2) {
      const std::size_t row = static_cast<std::size_t>(((k1 % m) + m) % m);
      const std::size_t col = static_cast<std::size_t>(((k2 % m) + m) % m);
      in[row * m + col] = f.at({k1, k2});
    }
  }
  std::vector<Complex> out(in.size());
  grid.fft().backward_complex(in, out);
  return out;
}

/// Discrete Fourier coefficients of collocation values, truncated to the grid cutoff.
inline SpectralField to_spectral(const TorusGrid& grid, std::span<const double> values) {
  const int m = grid.resolution();
  if (values.size() != grid.point_count()) {
    throw std::invalid_argument("collocation data has " + std::to_string(values.size()) +
                                " values, grid expects " + std::to_string(grid.point_count()));
  }
  std::vector<double> in(values.begin(), values.end());
  std::vector<Complex> half(static_cast<std::size_t>(m) * (m / 2 + 1));
  grid.fft().forward(in, half);
  const double scale = 1.0 / (static_cast<double>(m) * m);
  const int n = grid.cutoff();
  SpectralField f(grid);
  for (int k1 = -n; k1 <= n; ++k1) {
    for (int k2 = -n; k2 <= n; ++k2) {
      f.at({k1, k2}) = k2 >= 0 ? half[detail::half_index(m, k1, k2)] * scale
                               : std::conj(half[detail::half_index(m, -k1, -k2)]) * scale;
    }
  }
  return f;
}

inline SpectralField to_spectral(const TorusGrid& grid, const CollocationField& values) {
  if (values.resolution != grid.resolution()) {
    throw std::invalid_argument("collocation resolution does not match grid");
  }
  return to_spectral(grid, values.values);
}

/// Applies fn pointwise on the collocation grid and projects back.
template <class Fn>
SpectralField map_pointwise(const SpectralField& f, Fn&& fn) {
  CollocationField u = to_physical(f);
  for (double& x : u.values) x = fn(x);
  return to_spectral(f.grid(), u.values);
}

/// Mean of g over the collocation grid (exact for band-limited g of degree < M).
inline double collocation_mean(std::span<const double> values) {
  double s = 0.0;
  for (double v : values) s += v;
  return s / static_cast<double>(values.size());
}

}  // namespace phi42
