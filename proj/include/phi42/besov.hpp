#pragma once

// Littlewood-Paley blocks and Besov / Hoelder norms on the discrete torus.
//
// Partition: with theta(w) = 1 for w <= c/2, cos^2((pi/2) log2(2w/c)) for
// c/2 < w < c and 0 for w >= c,
//     chi_{-1}(w) = theta(w),   chi_j(w) = theta(w / 2^{j+1}) - theta(w / 2^j),
// so chi_j (j >= 0) lives on c 2^{j-1} <= w <= c 2^{j+1} and the blocks
// telescope to 1 on every retained frequency. Frequencies are Euclidean,
// w = 2 pi |k|_2 / L, and c = 1 by default.
//
// Norms: ||f||_{B^a_{p,q}} = l^q over j of 2^{a max(j,0)} ||chi_j f||_{L^p},
// with L^p taken w.r.t. the normalized measure L^{-2} dz on the collocation
// grid, so a constant c has norm |c| for every (a, p, q).

#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "phi42/spectral.hpp"

namespace phi42 {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

class DyadicPartition {
 public:
  explicit DyadicPartition(TorusGrid grid, double scale = 1.0)
      : grid_(std::move(grid)), scale_(scale) {
    require(scale > 0.0, "dyadic scale must be positive");
    double w_max = 0.0;
    for (std::size_t i = 0; i < grid_.mode_count(); ++i) w_max = std::max(w_max, grid_.frequency(i));
    max_level_ = w_max <= scale ? 0 : std::max(0, static_cast<int>(std::ceil(std::log2(w_max / scale))));
    // Guard against log2 rounding: telescoping needs w_max <= c 2^{max_level}.
    while (scale * std::ldexp(1.0, max_level_) < w_max) ++max_level_;

    symbols_.assign(static_cast<std::size_t>(level_count()), std::vector<double>(grid_.mode_count()));
    for (std::size_t i = 0; i < grid_.mode_count(); ++i) {
      const double w = grid_.frequency(i);
      symbols_[0][i] = theta(w);
      for (int j = 0; j <= max_level_; ++j) {
        symbols_[static_cast<std::size_t>(j + 1)][i] =
            theta(w / std::ldexp(1.0, j + 1)) - theta(w / std::ldexp(1.0, j));
      }
    }
  }

  const TorusGrid& grid() const { return grid_; }
  double scale() const { return scale_; }
  int min_level() const { return -1; }
  int max_level() const { return max_level_; }
  int level_count() const { return max_level_ + 2; }

  double symbol(int level, std::size_t mode_index) const {
    return symbols_[slot(level)][mode_index];
  }

  /// Smooth cutoff: 1 below c/2, 0 above c.
  double theta(double w) const {
    if (w <= 0.5 * scale_) return 1.0;
    if (w >= scale_) return 0.0;
    const double c = std::cos(0.5 * std::numbers::pi * std::log2(2.0 * w / scale_));
    return c * c;
  }

 private:
  std::size_t slot(int level) const {
    if (level < -1 || level > max_level_) {
      throw std::out_of_range("Littlewood-Paley level " + std::to_string(level) + " outside [-1, " +
                              std::to_string(max_level_) + "]");
    }
    return static_cast<std::size_t>(level + 1);
  }

  TorusGrid grid_;
  double scale_;
  int max_level_ = 0;
  std::vector<std::vector<double>> symbols_;
};

inline SpectralField lp_block(const SpectralField& f, const DyadicPartition& partition, int level) {
  if (!(f.grid() == partition.grid())) throw std::invalid_argument("partition built for another grid");
  SpectralField out(f.grid());
  for (std::size_t i = 0; i < f.size(); ++i) out[i] = f[i] * partition.symbol(level, i);
  return out;
}

namespace detail {

inline double lp_norm(std::span<const double> values, double p) {
  if (std::isinf(p)) {
    double m = 0.0;
    for (double v : values) m = std::max(m, std::abs(v));
    return m;
  }
  double s = 0.0;
  for (double v : values) s += std::pow(std::abs(v), p);
  return std::pow(s / static_cast<double>(values.size()), 1.0 / p);
}

}  // namespace detail

/// Per-level terms 2^{a max(j,0)} ||chi_j f||_{L^p}, j = -1..max_level.
inline std::vector<double> besov_terms(const SpectralField& f, const DyadicPartition& partition,
                                       double alpha, double p) {
  require(p >= 1.0, "Besov exponent p must lie in [1, inf]");
  std::vector<double> terms;
  terms.reserve(static_cast<std::size_t>(partition.level_count()));
  for (int j = partition.min_level(); j <= partition.max_level(); ++j) {
    SpectralField block = lp_block(f, partition, j);
    if (block.max_abs_coeff() == 0.0) {
      terms.push_back(0.0);
      continue;
    }
    const CollocationField u = to_physical(block);
    terms.push_back(std::pow(2.0, alpha * std::max(j, 0)) *
                    detail::lp_norm(u.values, p));
  }
  return terms;
}

inline double besov_norm(const SpectralField& f, const DyadicPartition& partition, double alpha,
                         double p, double q) {
  require(q >= 1.0, "Besov exponent q must lie in [1, inf]");
  const std::vector<double> terms = besov_terms(f, partition, alpha, p);
  if (std::isinf(q)) {
    double m = 0.0;
    for (double t : terms) m = std::max(m, t);
    return m;
  }
  double s = 0.0;
  for (double t : terms) s += std::pow(t, q);
  return std::pow(s, 1.0 / q);
}

inline double besov_norm(const SpectralField& f, double alpha, double p, double q) {
  return besov_norm(f, DyadicPartition(f.grid()), alpha, p, q);
}

/// C^alpha = B^alpha_{inf,inf}.
inline double holder_norm(const SpectralField& f, const DyadicPartition& partition, double alpha) {
  return besov_norm(f, partition, alpha, kInfinity, kInfinity);
}

inline double holder_norm(const SpectralField& f, double alpha) {
  return holder_norm(f, DyadicPartition(f.grid()), alpha);
}

}  // namespace phi42
