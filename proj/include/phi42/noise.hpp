#pragma once

// Space-time white noise, the linear object <1> and its Wick powers.
//
// <1>_N solves (d_t - (Delta - 1)) <1> = sqrt(2) xi_N with zero initial
// value. In the coefficient convention of spectral.hpp each mode is an OU
// process with rate mu_k = (2 pi |k| / L)^2 + 1 and stationary variance
// E|c_k|^2 = 1 / (L^2 mu_k); summing over the retained modes gives the
// pointwise stationary variance R_N, which is the normalization contract.
//
// Each time step draws, per mode of the closed half lattice, four standard
// normals (a_re, a_im, b_re, b_im) keyed by (seed, replica, step, mode). The
// OU increment uses `a` only; the heat-semigroup increment used by the
// direct scheme is the jointly Gaussian partner built from `a` and `b`, so
// both are integrals of the same Brownian path.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "phi42/besov.hpp"
#include "phi42/rng.hpp"
#include "phi42/spectral.hpp"
#include "phi42/stats.hpp"

namespace phi42 {

class NoiseStream {
 public:
  /// `substeps` > 1 makes every step of length h the exact composition of
  /// that many finer steps of the unrefined stream, so runs at dt and at
  /// dt / substeps see the same Brownian path.
  NoiseStream(std::uint64_t seed, std::uint64_t replica, unsigned substeps = 1)
      : seed_(seed), replica_(replica), substeps_(substeps), rng_(seed, replica) {
    require(substeps >= 1, "noise substeps must be >= 1");
  }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t replica() const { return replica_; }
  unsigned substeps() const { return substeps_; }

  /// Four independent N(0,1) for (step, k); k is taken in the closed half lattice.
  std::array<double, 4> mode_normals(std::uint64_t step, Mode k) const {
    const std::uint64_t key = (static_cast<std::uint64_t>(static_cast<std::uint32_t>(k.k1)) << 32) |
                              static_cast<std::uint32_t>(k.k2);
    const auto a = rng_.normal_pair(step, key, 0);
    const auto b = rng_.normal_pair(step, key, 1);
    return {a[0], a[1], b[0], b[1]};
  }

  const CounterRng& rng() const { return rng_; }

 private:
  std::uint64_t seed_;
  std::uint64_t replica_;
  unsigned substeps_;
  CounterRng rng_;
};

/// True for the representative of each {k, -k} pair (and for k = 0).
inline bool in_half_lattice(Mode k) { return k.k1 > 0 || (k.k1 == 0 && k.k2 >= 0); }

/// R_N = L^{-2} sum_{|k1| v |k2| <= N} 1 / ((2 pi |k| / L)^2 + 1).
inline double renorm_constant(double length, int cutoff, EigenNorm norm = EigenNorm::euclidean) {
  require(cutoff >= 0, "renormalization cutoff must be nonnegative");
  require(length > 0.0, "torus length must be positive");
  const double base = 2.0 * std::numbers::pi / length;
  CompensatedSum s;
  for (int k1 = -cutoff; k1 <= cutoff; ++k1) {
    for (int k2 = -cutoff; k2 <= cutoff; ++k2) {
      const double n2 = norm == EigenNorm::euclidean
                            ? static_cast<double>(k1 * k1 + k2 * k2)
                            : static_cast<double>(std::max(std::abs(k1), std::abs(k2)) *
                                                  std::max(std::abs(k1), std::abs(k2)));
      s.add(1.0 / (base * base * n2 + 1.0));
    }
  }
  return s.value() / (length * length);
}

inline double renorm_constant(const TorusGrid& grid) {
  return renorm_constant(grid.length(), grid.cutoff(), grid.eigen_norm());
}

/// C_N = L^{-2} sum 1/|lambda_k|, the alternative constant; exposed for cross-checks only.
inline double renorm_constant_lambda(const TorusGrid& grid) {
  CompensatedSum s;
  for (double q : grid.laplace_symbols()) s.add(1.0 / std::abs(q - 1.0));
  return s.value() / (grid.length() * grid.length());
}

/// OU rate mu_k = lambda_k + 2.
inline double ou_rate(const TorusGrid& grid, std::size_t i) { return grid.laplace_symbol(i) + 1.0; }

/// Stationary per-mode variance E|c_k|^2 of <1>.
inline double ou_stationary_variance(const TorusGrid& grid, std::size_t i) {
  return 1.0 / (grid.length() * grid.length() * ou_rate(grid, i));
}

struct NoiseIncrement {
  SpectralField ou;    // int_0^h e^{-(h-s)(1 - Delta)} sqrt(2) dW_s
  SpectralField heat;  // int_0^h e^{(h-s) Delta} sqrt(2) dW_s
};

namespace detail {

// (1 - e^{-r h}) / r, with the r -> 0 limit h.
inline double expm1_ratio(double r, double h) {
  return r == 0.0 ? h : -std::expm1(-r * h) / r;
}

}  // namespace detail

namespace detail {

inline NoiseIncrement single_increment(const TorusGrid& grid, double h, const NoiseStream& noise,
                                       std::uint64_t step) {
  NoiseIncrement inc{SpectralField(grid), SpectralField(grid)};
  const double inv_area = 1.0 / (grid.length() * grid.length());
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  for (std::size_t i = 0; i < grid.mode_count(); ++i) {
    const Mode k = grid.mode(i);
    if (!in_half_lattice(k)) continue;
    const double q = grid.laplace_symbol(i);
    const double mu = q + 1.0;
    // Variances of the two convolutions and their covariance (all times 2/L^2).
    const double var_ou = 2.0 * inv_area * expm1_ratio(2.0 * mu, h);
    const double var_heat = 2.0 * inv_area * expm1_ratio(2.0 * q, h);
    const double cov = 2.0 * inv_area * expm1_ratio(mu + q, h);
    const double s_ou = std::sqrt(var_ou);
    const double s_heat = std::sqrt(var_heat);
    const double rho = std::clamp(cov / (s_ou * s_heat), -1.0, 1.0);
    const double rho_perp = std::sqrt(std::max(0.0, 1.0 - rho * rho));
    const auto z = noise.mode_normals(step, k);
    if (k == Mode{0, 0}) {
      inc.ou[i] = s_ou * z[0];
      inc.heat[i] = s_heat * (rho * z[0] + rho_perp * z[2]);
      continue;
    }
    const Complex a{z[0], z[1]};
    const Complex b{z[2], z[3]};
    const Complex eta = s_ou * inv_sqrt2 * a;
    const Complex heat = s_heat * inv_sqrt2 * (rho * a + rho_perp * b);
    const std::size_t mirror = grid.index({-k.k1, -k.k2});
    inc.ou[i] = eta;
    inc.ou[mirror] = std::conj(eta);
    inc.heat[i] = heat;
    inc.heat[mirror] = std::conj(heat);
  }
  return inc;
}

}  // namespace detail

/// Exact-in-law stochastic convolutions for one step of length h.
inline NoiseIncrement noise_increment(const TorusGrid& grid, double h, const NoiseStream& noise,
                                      std::uint64_t step) {
  require(h > 0.0, "time step must be positive");
  const unsigned s = noise.substeps();
  if (s == 1) return detail::single_increment(grid, h, noise, step);
  const double hf = h / s;
  NoiseIncrement acc{SpectralField(grid), SpectralField(grid)};
  for (unsigned j = 0; j < s; ++j) {
    const NoiseIncrement fine = detail::single_increment(grid, hf, noise, step * s + j);
    for (std::size_t i = 0; i < grid.mode_count(); ++i) {
      const double q = grid.laplace_symbol(i);
      acc.ou[i] = std::exp(-(q + 1.0) * hf) * acc.ou[i] + fine.ou[i];
      acc.heat[i] = std::exp(-q * hf) * acc.heat[i] + fine.heat[i];
    }
  }
  return acc;
}

/// Exact OU update a_k <- e^{-mu_k h} a_k + eta_k given a precomputed increment.
inline SpectralField ou_step(SpectralField state, double h, const SpectralField& increment) {
  require(h > 0.0, "time step must be positive");
  const TorusGrid& grid = state.grid();
  for (std::size_t i = 0; i < state.size(); ++i) {
    state[i] = std::exp(-ou_rate(grid, i) * h) * state[i] + increment[i];
  }
  return state;
}

inline SpectralField ou_step(SpectralField state, double h, const NoiseStream& noise,
                             std::uint64_t step) {
  require(h > 0.0, "time step must be positive");
  const NoiseIncrement inc = noise_increment(state.grid(), h, noise, step);
  return ou_step(std::move(state), h, inc.ou);
}

/// (<1>^2 - R, <1>^3 - 3 R <1>) on the collocation grid, projected to the cutoff.
inline std::pair<SpectralField, SpectralField> wick_powers(const SpectralField& one, double renorm) {
  const CollocationField u = to_physical(one);
  std::vector<double> two(u.values.size()), three(u.values.size());
  for (std::size_t j = 0; j < u.values.size(); ++j) {
    const double x = u.values[j];
    two[j] = x * x - renorm;
    three[j] = x * x * x - 3.0 * renorm * x;
  }
  return {to_spectral(one.grid(), two), to_spectral(one.grid(), three)};
}

struct WickTriple {
  SpectralField one;
  SpectralField two;
  SpectralField three;
  double restart_time = 0.0;
  double renorm = 0.0;

  static WickTriple zero(const TorusGrid& grid, double restart_time) {
    return {SpectralField(grid), SpectralField(grid), SpectralField(grid), restart_time,
            renorm_constant(grid)};
  }

  /// Builds the triple from <1>; two and three follow from the Wick rule.
  static WickTriple from_one(SpectralField one, double restart_time, double renorm) {
    auto [two, three] = wick_powers(one, renorm);
    return {std::move(one), std::move(two), std::move(three), restart_time, renorm};
  }

  const SpectralField& operator[](int n) const {
    switch (n) {
      case 1: return one;
      case 2: return two;
      case 3: return three;
      default: throw std::out_of_range("Wick order must be 1, 2 or 3");
    }
  }
};

/// <1>_s(t) from the unrestarted path: <1>(t) - e^{-(t-s)(1-Delta)} <1>(s).
/// Exact for the discrete scheme as well, since both share increments.
inline SpectralField restarted_from_global(const SpectralField& one_t, const SpectralField& one_s,
                                           double elapsed) {
  require(elapsed >= 0.0, "restart time lies after the evaluation time");
  SpectralField out = one_t;
  const TorusGrid& grid = out.grid();
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] -= std::exp(-ou_rate(grid, i) * elapsed) * one_s[i];
  }
  return out;
}

/// Stochastic objects restarted from zero at time s and advanced in steps of
/// dt with the stream's increments for the global step indices after s.
class WickProcess {
 public:
  WickProcess(TorusGrid grid, NoiseStream noise, double dt, std::int64_t restart_step)
      : grid_(std::move(grid)),
        noise_(noise),
        dt_(dt),
        restart_step_(restart_step),
        step_(restart_step),
        renorm_(renorm_constant(grid_)),
        one_(grid_) {
    require(dt > 0.0, "time step must be positive");
    require(restart_step >= 0, "restart step must be nonnegative");
  }

  void advance() {
    one_ = ou_step(std::move(one_), dt_, noise_, static_cast<std::uint64_t>(step_));
    ++step_;
  }
  void advance_with(const SpectralField& ou_increment) {
    one_ = ou_step(std::move(one_), dt_, ou_increment);
    ++step_;
  }

  double restart_time() const { return static_cast<double>(restart_step_) * dt_; }
  double time() const { return static_cast<double>(step_) * dt_; }
  std::int64_t step() const { return step_; }
  double renorm() const { return renorm_; }
  const SpectralField& one() const { return one_; }
  WickTriple triple() const { return WickTriple::from_one(one_, restart_time(), renorm_); }

 private:
  TorusGrid grid_;
  NoiseStream noise_;
  double dt_;
  std::int64_t restart_step_;
  std::int64_t step_;
  double renorm_;
  SpectralField one_;
};

/// Fresh objects, zero at time s, driven by the increments after s.
inline WickProcess restart(const TorusGrid& grid, const NoiseStream& noise, double dt, double s,
                           double horizon) {
  require(s >= 0.0, "restart time must be nonnegative");
  require(s <= horizon, "restart time lies beyond the simulation horizon");
  const double steps = s / dt;
  const auto step = static_cast<std::int64_t>(std::llround(steps));
  require(std::abs(steps - static_cast<double>(step)) < 1e-9 * std::max(1.0, steps),
          "restart time must be a multiple of the time step");
  return WickProcess(grid, noise, dt, step);
}

struct TimedField {
  double time = 0.0;  // elapsed since the restart
  SpectralField field;
};

/// sup_{t <= T} (t ^ 1)^{(n-1) alpha'} ||<n>(t)||_{C^{-alpha}} over the samples.
inline double weighted_tree_norm(std::span<const TimedField> trajectory, int n, double alpha,
                                 double alpha_prime, double horizon,
                                 const DyadicPartition& partition) {
  require(!trajectory.empty(), "weighted tree norm of an empty trajectory");
  require(n >= 1 && n <= 3, "Wick order must be 1, 2 or 3");
  require(alpha > 0.0 && alpha_prime > 0.0, "tree norm exponents must be positive");
  double sup = 0.0;
  for (const TimedField& s : trajectory) {
    if (s.time > horizon) continue;
    const double weight = std::pow(std::min(s.time, 1.0), (n - 1) * alpha_prime);
    if (weight == 0.0) continue;
    sup = std::max(sup, weight * holder_norm(s.field, partition, -alpha));
  }
  return sup;
}

/// Sample mean of exp{c v^{2/n}} with its standard error.
inline Estimate empirical_exp_moment(std::span<const double> samples, double c, int n) {
  require(c > 0.0, "exponential moment constant must be positive");
  require(n >= 1 && n <= 3, "Wick order must be 1, 2 or 3");
  std::vector<double> values;
  values.reserve(samples.size());
  for (double v : samples) values.push_back(std::exp(c * std::pow(v, 2.0 / n)));
  return mean_estimate(values);
}

}  // namespace phi42
