#pragma once

// Potential, rate functional, spectral prefactor and transition-time Monte
// Carlo between the two metastable wells.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

#include "phi42/besov.hpp"
#include "phi42/dynamics.hpp"
#include "phi42/error.hpp"
#include "phi42/noise.hpp"
#include "phi42/parallel.hpp"
#include "phi42/spectral.hpp"
#include "phi42/stats.hpp"

namespace phi42 {

/// V(f) = int (|grad f|^2 / 2 - f^2 / 2 + f^4 / 4); the quartic is exact for M > 4N.
inline double potential_V(const SpectralField& f) {
  const TorusGrid& grid = f.grid();
  const double area = grid.length() * grid.length();
  CompensatedSum gradient;
  for (std::size_t i = 0; i < f.size(); ++i) gradient.add(grid.laplace_symbol(i) * std::norm(f[i]));
  const CollocationField u = to_physical(f);
  CompensatedSum local;
  for (double x : u.values) local.add(-0.5 * x * x + 0.25 * x * x * x * x);
  return area * (0.5 * gradient.value() + local.value() / double(u.values.size()));
}

/// L^2 gradient -Delta f - f + f^3 projected onto the retained modes; dV(f)[h] = Re inner_product(G, h).
inline SpectralField potential_gradient(const SpectralField& f) {
  CollocationField u = to_physical(f);
  for (double& x : u.values) x = x * x * x - x;
  SpectralField g = to_spectral(f.grid(), u.values);
  for (std::size_t i = 0; i < g.size(); ++i) g[i] += f.grid().laplace_symbol(i) * f[i];
  return g;
}

/// Uniformly spaced snapshots f(0), f(dt), ...
struct PathSample {
  double dt = 0.0;
  std::vector<SpectralField> snapshots;

  static PathSample from_record(const TrajectoryRecord& rec) { return {rec.sample_dt(), rec.x}; }

  void validate() const {
    require(snapshots.size() >= 2, "rate functional needs >= 2 snapshots");
    require(dt > 0.0, "path sample spacing must be > 0");
    for (const auto& s : snapshots) require(s.grid() == snapshots.front().grid(), "snapshots on mixed grids");
  }
};

/// Straight line x + (t / tau)(y - x) sampled with `steps` intervals.
inline PathSample linear_interpolation(const SpectralField& x, const SpectralField& y, double tau, int steps) {
  require(tau > 0.0 && steps >= 1, "interpolation needs tau > 0 and >= 1 step");
  PathSample p{tau / steps, {}};
  for (int i = 0; i <= steps; ++i) p.snapshots.push_back(x + (double(i) / steps) * (y - x));
  return p;
}

/// Reverses time order.
inline PathSample reversed(PathSample p) {
  std::reverse(p.snapshots.begin(), p.snapshots.end());
  return p;
}

/// I(f) = 1/4 int ||d_t f - (Delta f - f^3 + f)||^2 dt; second-order differences, trapezoid in t.
inline double rate_functional(const PathSample& path) {
  path.validate();
  const auto& s = path.snapshots;
  const std::size_t n = s.size();
  auto velocity = [&](std::size_t i) -> SpectralField {
    if (n == 2) return (1.0 / path.dt) * (s[1] - s[0]);
    if (i == 0) return (0.5 / path.dt) * (-3.0 * s[0] + 4.0 * s[1] - s[2]);
    if (i == n - 1) return (0.5 / path.dt) * (3.0 * s[n - 1] - 4.0 * s[n - 2] + s[n - 3]);
    return (0.5 / path.dt) * (s[i + 1] - s[i - 1]);
  };
  CompensatedSum integral;
  for (std::size_t i = 0; i < n; ++i) {
    // d_t f + grad V(f) is the residual against the drift -grad V.
    const double r = (velocity(i) + potential_gradient(s[i])).l2_norm_sq();
    integral.add((i == 0 || i == n - 1 ? 0.5 : 1.0) * r);
  }
  return 0.25 * path.dt * integral.value();
}

/// Barrier V(0) - V(-1) = L^2 / 4.
inline double barrier(double length) { return 0.25 * length * length; }

/// Per-mode log factor log(|lambda| / nu) + 3 / (lambda + 2), lambda = (2 pi |k| / L)^2 - 1.
inline double prefactor_log_term(double length, Mode k) {
  const double a = 2.0 * std::numbers::pi / length;
  const double lambda = a * a * euclidean_norm_sq(k) - 1.0;
  require(lambda != 0.0, "a retained eigenvalue lambda_k vanishes");
  return std::log(std::abs(lambda) / (lambda + 3.0)) + 3.0 / (lambda + 2.0);
}

/// Log factors of all modes with |k1| v |k2| <= n, in lattice order.
inline std::vector<double> prefactor_log_terms(double length, int n) {
  require(length > 0.0, "torus length must be positive");
  require(n >= 0, "prefactor truncation must be >= 0");
  std::vector<double> out;
  out.reserve(std::size_t(2 * n + 1) * std::size_t(2 * n + 1));
  for (int k1 = -n; k1 <= n; ++k1)
    for (int k2 = -n; k2 <= n; ++k2) out.push_back(prefactor_log_term(length, {k1, k2}));
  return out;
}

/// Bound on sum over discarded modes of 3 / ((lambda + 2)(lambda + 3)) <= 3 / (a |k|)^4:
/// shell n carries 8n modes with |k| >= n.
inline double prefactor_tail_sum(double length, int n) {
  const double a2 = std::pow(2.0 * std::numbers::pi / length, 2);
  // sum_{m > n} m^{-3} <= 1 / (2 n^2); zeta(3) for n = 0.
  const double zeta_tail = n == 0 ? 1.2020569031595943 : 0.5 / (double(n) * n);
  return 24.0 / (a2 * a2) * zeta_tail;
}

struct Prefactor {
  double value = 0.0;
  double log_value = 0.0;
  // Bound on |log(value at infinite truncation) - log_value|.
  double tail_bound = 0.0;
  double barrier = 0.0;
};

/// (2 pi / |lambda_0|) sqrt(prod (|lambda_k| / nu_k) e^{(nu_k - lambda_k) / (lambda_k + 2)}), lambda_0 = -1.
inline Prefactor prefactor(double length, int n) {
  CompensatedSum s;
  for (double t : prefactor_log_terms(length, n)) s.add(t);
  Prefactor p;
  p.log_value = std::log(2.0 * std::numbers::pi) + 0.5 * s.value();
  p.value = std::exp(p.log_value);
  p.tail_bound = 0.5 * prefactor_tail_sum(length, n);
  p.barrier = barrier(length);
  return p;
}

/// prefactor * exp(L^2 / (4 eps)).
inline double kramers_time(double length, double eps, int n) {
  require(eps > 0.0, "eps > 0 violated");
  return std::exp(prefactor(length, n).log_value + barrier(length) / eps);
}

/// A: mean near -1, B: mean near +1, zero-mean part small in C^{-alpha}.
struct MetastableSets {
  double delta = 0.3;
  double alpha = 0.2;

  void validate() const {
    require(delta > 0.0 && delta < 0.5, "set radius delta in (0, 1/2) violated");
    require(alpha > 0.0, "set regularity alpha > 0 violated");
  }

  bool near(const SpectralField& f, double center, const DyadicPartition& part) const {
    const double m = field_mean(f);
    if (std::abs(m - center) > delta) return false;
    return holder_norm(f - m, part, -alpha) <= delta;
  }
  bool in_A(const SpectralField& f, const DyadicPartition& part) const { return near(f, -1.0, part); }
  bool in_B(const SpectralField& f, const DyadicPartition& part) const { return near(f, 1.0, part); }
  bool in_A(const SpectralField& f) const { return in_A(f, DyadicPartition(f.grid())); }
  bool in_B(const SpectralField& f) const { return in_B(f, DyadicPartition(f.grid())); }
};

struct HittingResult {
  double time = 0.0;  // first sample time in B, or the horizon on timeout
  bool hit = false;
};

/// First sample time (multiples of dt * sample_every, starting after one sample) at which X is in B.
inline HittingResult hitting_time(const SpectralField& x0, const SolverConfig& cfg, const MetastableSets& sets,
                                  std::uint64_t seed, std::uint64_t replica, double horizon) {
  sets.validate();
  require(cfg.scheme == Scheme::direct, "hitting times use the direct scheme");
  require(horizon > 0.0, "hitting horizon must be > 0");
  const DyadicPartition part(cfg.grid);
  Simulation sim(x0, cfg, NoiseStream(seed, replica));
  const auto steps = static_cast<std::int64_t>(std::ceil(horizon / cfg.dt - 1e-9));
  for (std::int64_t n = 1; n <= steps; ++n) {
    sim.step();
    if (n % cfg.sample_every == 0 && sets.in_B(sim.X(), part)) return {sim.time(), true};
  }
  return {sim.time(), false};
}

struct TransitionSample {
  double eps = 0.0;
  std::vector<HittingResult> results;

  std::vector<double> hit_times() const {
    std::vector<double> t;
    for (const auto& r : results)
      if (r.hit) t.push_back(r.time);
    return t;
  }
  std::size_t timeouts() const { return results.size() - hit_times().size(); }
  Estimate mean() const { return mean_estimate(hit_times()); }
};

/// Replica-parallel hitting times from x0; dt <= eps / 10 is enforced.
inline TransitionSample transition_times(const SpectralField& x0, SolverConfig cfg, const MetastableSets& sets,
                                         std::uint64_t seed, std::size_t replicas, double horizon) {
  require(cfg.eps > 0.0, "transition experiments need eps > 0");
  require(cfg.dt <= cfg.eps / 10.0 * (1 + 1e-12), "dt <= eps / 10 violated");
  require(replicas >= 1, "replicas >= 1 violated");
  TransitionSample out{cfg.eps, {}};
  out.results = parallel_map<HittingResult>(
      replicas, [&](std::size_t r) { return hitting_time(x0, cfg, sets, seed, r, horizon); });
  return out;
}

struct ArrheniusFit {
  LinearFit fit;  // log(mean tau) = intercept + slope / eps
  double slope() const { return fit.slope; }
  double intercept() const { return fit.intercept; }
};

/// Weighted least squares of log mean times against 1 / eps; weights (mean / stderr)^2 when given.
inline ArrheniusFit arrhenius_fit(std::span<const double> eps, std::span<const double> means,
                                  std::span<const double> std_errors = {}) {
  require(eps.size() >= 3, "Arrhenius fit needs >= 3 eps values");
  require(means.size() == eps.size(), "eps and mean counts differ");
  require(std_errors.empty() || std_errors.size() == eps.size(), "stderr count differs");
  std::vector<double> x, y, w;
  for (std::size_t i = 0; i < eps.size(); ++i) {
    require(eps[i] > 0.0 && means[i] > 0.0, "eps and mean times must be > 0");
    x.push_back(1.0 / eps[i]);
    y.push_back(std::log(means[i]));
    if (!std_errors.empty()) {
      require(std_errors[i] > 0.0, "standard errors must be > 0");
      w.push_back(std::pow(means[i] / std_errors[i], 2));
    }
  }
  std::vector<double> sorted = x;
  std::sort(sorted.begin(), sorted.end());
  require(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end(), "degenerate eps grid");
  return {fit_line(x, y, w, !w.empty())};
}

/// Line fit of log empirical survival against t for samples beyond the median.
inline LinearFit tail_log_survival_fit(std::vector<double> times) {
  require(times.size() >= 8, "tail fit needs >= 8 samples");
  std::sort(times.begin(), times.end());
  const std::size_t n = times.size();
  std::vector<double> t, logs;
  for (std::size_t i = n / 2; i + 1 < n; ++i) {
    t.push_back(times[i]);
    logs.push_back(std::log(double(n - 1 - i) / double(n)));
  }
  return fit_line(t, logs);
}

}  // namespace phi42
