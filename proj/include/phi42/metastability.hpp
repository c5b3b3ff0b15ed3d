#pragma once

// Coupled runs, good/bad interval decomposition, the L_k growth functionals
// and the random walk S_N built from them.
//
// Good interval i starts at rho_{i-1}. nu_i is the first sample where either
//     ((t - rho) ^ 1)^gamma  min_{x* = +-1} ||v_rho(t) - x*||_{C^beta} >= delta1,
// with v_rho = X - sqrt(eps) <1>_rho the remainder restarted at rho_{i-1}, or
//     ((t - rho) ^ 1)^{(n-1) alpha'} ||eps^{n/2} <n>_rho(t)||_{C^{-alpha}} >= delta2^n
// for some n. rho_i is the first sample after nu_i where X lies in the
// closed delta0 ball of C^{-alpha0} around -1 or +1. Restarted objects are
// computed exactly from the unrestarted <1> path.

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "phi42/besov.hpp"
#include "phi42/dynamics.hpp"
#include "phi42/error.hpp"
#include "phi42/noise.hpp"
#include "phi42/parallel.hpp"
#include "phi42/stats.hpp"

namespace phi42 {

struct StoppingConfig {
  double delta0 = 0.3;
  double delta1 = 0.3;
  double delta2 = 0.3;
  double alpha0 = 0.2;
  double beta = 0.2;
  double gamma = 0.3;
  double alpha = 0.1;
  double alpha_prime = 0.2;
  double kappa = 1.0;
  double c0 = 1.0;
  double p0 = 2.0;
  double L0 = 1.0;
  double M0 = 1.0;

  void validate() const {
    require(delta0 > 0.0, "delta0 > 0 violated");
    require(delta1 >= 0.0, "delta1 >= 0 violated");
    require(delta2 >= 0.0, "delta2 >= 0 violated");
    require(alpha0 > 0.0 && beta > 0.0 && alpha > 0.0 && alpha_prime > 0.0,
            "Besov exponents alpha0, beta, alpha, alpha' must be positive");
    require(gamma < 1.0 / 3.0, "gamma < 1/3 violated");
    require((alpha0 + beta) / 2.0 < gamma, "(alpha0+beta)/2 < gamma violated");
    require(alpha_prime < gamma, "alpha' < gamma violated");
    require(alpha < alpha0, "alpha < alpha0 violated");
    require((alpha + beta) / 2.0 + 2.0 * gamma < 1.0, "(alpha+beta)/2 + 2 gamma < 1 violated");
    require(kappa > 0.0 && kappa < 2.0, "kappa in (0, 2) violated");
    require(c0 >= 0.0 && p0 >= 1.0 && L0 >= 0.0 && M0 >= 0.0, "growth constants c0, L0, M0 >= 0 and p0 >= 1 violated");
  }
};

// ---------------------------------------------------------------- coupling

struct CouplingOptions {
  double beta = 0.2;
  double alpha0 = 0.2;
  double fit_start = 1.0;
  double fit_end = 6.0;
  bool independent_noise = false;
};

struct CouplingResult {
  std::vector<double> times;  // sample times t > 0
  std::vector<double> ratio;  // ||X(t;y) - X(t;x)||_{C^beta} / ||y - x||_{C^{-alpha0}}
  double initial_distance = 0.0;
  LinearFit fit;  // log ratio against t on the fit window

  std::vector<double> log_ratio() const {
    std::vector<double> out;
    for (double r : ratio) out.push_back(std::log(r));
    return out;
  }
};

namespace detail {

inline LinearFit fit_log_window(const std::vector<double>& times, const std::vector<double>& values,
                                double start, double end) {
  std::vector<double> t, y;
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (times[i] < start - 1e-12 || times[i] > end + 1e-12) continue;
    if (!(values[i] > 0.0)) continue;
    t.push_back(times[i]);
    y.push_back(std::log(values[i]));
  }
  require(t.size() >= 2, "fit window contains fewer than two usable samples");
  return fit_line(t, y);
}

}  // namespace detail

/// Runs any number of solutions from `initials` on one noise realization
/// (or on independent replicas) and reports, at every sample time, the
/// largest ratio over all pairs.
inline CouplingResult coupled_ensemble(const std::vector<SpectralField>& initials, const SolverConfig& cfg,
                                       std::uint64_t seed, const CouplingOptions& opt = {}) {
  cfg.validate();
  require(initials.size() >= 2, "coupling needs at least two initial conditions");
  require(opt.fit_end > opt.fit_start, "coupling fit window is empty");
  const DyadicPartition partition(cfg.grid);
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  std::vector<double> denom;
  for (std::size_t a = 0; a < initials.size(); ++a) {
    for (std::size_t b = a + 1; b < initials.size(); ++b) {
      const double d = holder_norm(initials[b] - initials[a], partition, -opt.alpha0);
      require(d > 0.0, "initial conditions coincide; the difference ratio is undefined");
      pairs.emplace_back(a, b);
      denom.push_back(d);
    }
  }
  std::vector<Simulation> sims;
  for (std::size_t a = 0; a < initials.size(); ++a) {
    sims.emplace_back(initials[a], cfg, NoiseStream(seed, opt.independent_noise ? a : 0));
  }
  CouplingResult out;
  out.initial_distance = *std::min_element(denom.begin(), denom.end());
  const std::int64_t steps = cfg.total_steps();
  for (std::int64_t n = 1; n <= steps; ++n) {
    if (opt.independent_noise || !sims[0].needs_noise()) {
      for (Simulation& s : sims) s.step();
    } else {
      const NoiseIncrement inc =
          noise_increment(cfg.grid, cfg.dt, sims[0].noise(), static_cast<std::uint64_t>(n - 1));
      for (Simulation& s : sims) s.advance(&inc);
    }
    if (n % cfg.sample_every != 0) continue;
    double worst = 0.0;
    for (std::size_t p = 0; p < pairs.size(); ++p) {
      const SpectralField diff = sims[pairs[p].second].X() - sims[pairs[p].first].X();
      worst = std::max(worst, holder_norm(diff, partition, opt.beta) / denom[p]);
    }
    out.times.push_back(sims[0].time());
    out.ratio.push_back(worst);
  }
  out.fit = detail::fit_log_window(out.times, out.ratio, opt.fit_start, opt.fit_end);
  return out;
}

inline CouplingResult coupled_run(const SpectralField& x, const SpectralField& y, const SolverConfig& cfg,
                                  std::uint64_t seed, const CouplingOptions& opt = {}) {
  return coupled_ensemble({x, y}, cfg, seed, opt);
}

/// Initial conditions spread over the delta0 ball of `center`: the even
/// entries shift the mean, the odd ones add a (1, 0) cosine, both scaled so
/// that ||x - center||_{C^{-alpha0}} <= delta0.
inline std::vector<SpectralField> ball_grid(const SpectralField& center, double delta0, std::size_t count,
                                            double alpha0 = 0.2) {
  require(count >= 2, "initial-condition grid needs at least two points");
  require(delta0 >= 0.0, "ball radius must be nonnegative");
  const TorusGrid& grid = center.grid();
  const DyadicPartition partition(grid);
  SpectralField wave = grid.cutoff() >= 1 ? SpectralField::cosine(grid, {1, 0}, 1.0) : SpectralField::constant(grid, 1.0);
  wave *= 1.0 / holder_norm(wave, partition, -alpha0);
  const SpectralField shift = SpectralField::constant(grid, 1.0);
  std::vector<SpectralField> out;
  for (std::size_t j = 0; j < count; ++j) {
    const double s = delta0 * (2.0 * static_cast<double>(j) / static_cast<double>(count - 1) - 1.0);
    out.push_back(center + s * (j % 2 == 0 ? shift : wave));
  }
  return out;
}

/// Worst pair over a grid of initial conditions in the delta0 ball, one noise.
inline CouplingResult sup_over_initials(const SpectralField& center, double delta0, std::size_t count,
                                        const SolverConfig& cfg, std::uint64_t seed,
                                        const CouplingOptions& opt = {}) {
  return coupled_ensemble(ball_grid(center, delta0, count, opt.alpha0), cfg, seed, opt);
}

struct CouplingSummary {
  double slope_mean = 0.0;
  double slope_sd = 0.0;
  double pass_fraction = 0.0;
  std::vector<double> slopes;
};

inline CouplingSummary summarize_slopes(std::vector<double> slopes, double lo = -2.5, double hi = -1.5) {
  require(!slopes.empty(), "no coupling runs to summarize");
  CouplingSummary s;
  std::size_t pass = 0;
  CompensatedSum sum;
  for (double v : slopes) {
    sum.add(v);
    if (v >= lo && v <= hi) ++pass;
  }
  s.slope_mean = sum.value() / static_cast<double>(slopes.size());
  double var = 0.0;
  for (double v : slopes) var += (v - s.slope_mean) * (v - s.slope_mean);
  s.slope_sd = slopes.size() > 1 ? std::sqrt(var / static_cast<double>(slopes.size() - 1)) : 0.0;
  s.pass_fraction = static_cast<double>(pass) / static_cast<double>(slopes.size());
  s.slopes = std::move(slopes);
  return s;
}

// --------------------------------------------------------------- intervals

enum class OpenInterval { none, good, bad };

struct IntervalDecomposition {
  std::vector<double> rho{0.0};  // rho_0 = 0, rho_1, ...
  std::vector<double> nu;        // nu_1, nu_2, ...
  double horizon = 0.0;
  OpenInterval open = OpenInterval::good;
  /// lk[i][k-1] = {L_k(nu_i, rho_i), L_k(nu_i + 1/2, rho_i)} for completed pair i.
  std::vector<std::vector<std::array<double, 2>>> lk;
  std::vector<double> growth;  // L(nu_i, rho_i; sigma_i)
  std::vector<double> walk;    // S_1, S_2, ...

  std::size_t completed() const { return std::min(nu.size(), rho.size() - 1); }
  std::vector<double> tau() const {
    std::vector<double> out;
    for (std::size_t i = 0; i < nu.size(); ++i) out.push_back(nu[i] - rho[i]);
    return out;
  }
  std::vector<double> sigma() const {
    std::vector<double> out;
    for (std::size_t i = 0; i < completed(); ++i) out.push_back(rho[i + 1] - nu[i]);
    return out;
  }
  /// Fraction of [0, horizon] spent in good intervals.
  double good_fraction() const {
    double good = 0.0;
    for (double t : tau()) good += t;
    if (nu.size() + 1 == rho.size()) good += horizon - rho.back();
    return horizon > 0.0 ? good / horizon : 1.0;
  }
};

namespace detail {

inline std::size_t sample_index(const TrajectoryRecord& rec, double t) {
  const double h = rec.sample_dt();
  const double m = t / h;
  const auto i = static_cast<std::size_t>(std::llround(m));
  require(std::abs(m - static_cast<double>(i)) < 1e-6, "time " + std::to_string(t) + " is not a sample time");
  require(i < rec.times.size(), "time " + std::to_string(t) + " lies beyond the record");
  return i;
}

// <1>_s(t) from the stored global path.
inline SpectralField restarted_one(const TrajectoryRecord& rec, std::size_t s, std::size_t t) {
  return restarted_from_global(rec.one[t], rec.one[s], rec.times[t] - rec.times[s]);
}

inline double nearer_distance(const SpectralField& f, const DyadicPartition& part, double alpha) {
  // Ties go to -1.
  return std::min(holder_norm(f + 1.0, part, alpha), holder_norm(f - 1.0, part, alpha));
}

}  // namespace detail

/// Per-order inner values sup_t (t - t_{k-1})^{(n-1) alpha'} ||eps^{n/2} <n>_{t_{k-1}}(t)||_{C^{-alpha}},
/// t in [t_{k-1}, t_k ^ rho], t_k = nu + l + k.
inline std::array<double, 3> compute_Lk_components(const TrajectoryRecord& rec, double nu, double rho, int k,
                                                   double l, const StoppingConfig& cfg,
                                                   const DyadicPartition& part) {
  require(rec.split_form(), "L_k needs a record with the <1> path");
  require(rho > nu, "L_k needs rho > nu");
  require(k >= 1, "L_k index k must be >= 1");
  require(l == 0.0 || l == 0.5, "L_k offset l must be 0 or 1/2");
  std::array<double, 3> sup{0.0, 0.0, 0.0};
  if (rec.eps == 0.0) return sup;
  const double start = nu + l + (k - 1);
  const double end = std::min(nu + l + k, rho);
  if (start > end + 1e-12) return sup;
  const std::size_t s = detail::sample_index(rec, start);
  const std::size_t e = detail::sample_index(rec, end);
  for (std::size_t t = s; t <= e; ++t) {
    const SpectralField one = detail::restarted_one(rec, s, t);
    const WickTriple w = WickTriple::from_one(one, rec.times[s], rec.renorm);
    const double elapsed = rec.times[t] - rec.times[s];
    for (int n = 1; n <= 3; ++n) {
      const double weight = std::pow(elapsed, (n - 1) * cfg.alpha_prime);
      if (weight == 0.0) continue;
      const double v = weight * std::pow(rec.eps, 0.5 * n) * holder_norm(w[n], part, -cfg.alpha);
      sup[static_cast<std::size_t>(n - 1)] = std::max(sup[static_cast<std::size_t>(n - 1)], v);
    }
  }
  return sup;
}

inline double compute_Lk(const TrajectoryRecord& rec, double nu, double rho, int k, double l,
                         const StoppingConfig& cfg, const DyadicPartition& part) {
  const auto c = compute_Lk_components(rec, nu, rho, k, l, cfg, part);
  double out = 0.0;
  for (int n = 1; n <= 3; ++n) out = std::max(out, std::pow(c[static_cast<std::size_t>(n - 1)], 2.0 / n));
  return out;
}

/// (c0/2) sum_{k <= floor(elapsed)} sum_l (1 v L_k)^{p0} + L0 elapsed.
inline double growth_functional(std::span<const std::array<double, 2>> lk, double elapsed,
                                const StoppingConfig& cfg) {
  require(elapsed >= 0.0, "growth functional needs a nonnegative elapsed time");
  const auto whole = static_cast<std::size_t>(std::floor(elapsed + 1e-12));
  require(lk.size() >= whole, "growth functional needs L_k for every whole unit of elapsed time");
  CompensatedSum s;
  for (std::size_t k = 0; k < whole; ++k) {
    for (double v : lk[k]) s.add(std::pow(std::max(1.0, v), cfg.p0));
  }
  return 0.5 * cfg.c0 * s.value() + cfg.L0 * elapsed;
}

/// S_N = sum_{i <= N} [(kappa/2) tau_i - (L_i + (2 - kappa) sigma_i + M0)].
inline std::vector<double> walk_from(std::span<const double> tau, std::span<const double> sigma,
                                     std::span<const double> growth, const StoppingConfig& cfg) {
  require(sigma.size() == growth.size() && tau.size() >= sigma.size(), "walk inputs have inconsistent lengths");
  std::vector<double> path;
  double s = 0.0;
  for (std::size_t i = 0; i < sigma.size(); ++i) {
    s += 0.5 * cfg.kappa * tau[i] - (growth[i] + (2.0 - cfg.kappa) * sigma[i] + cfg.M0);
    path.push_back(s);
  }
  return path;
}

inline std::vector<double> random_walk(const IntervalDecomposition& d, const StoppingConfig& cfg) {
  const std::vector<double> tau = d.tau(), sigma = d.sigma();
  return walk_from(tau, sigma, d.growth, cfg);
}

/// Stopping times only (no L_k); see the header comment for the rules.
inline IntervalDecomposition classify_stopping_times(const TrajectoryRecord& rec, const StoppingConfig& cfg,
                                                     const DyadicPartition& part) {
  cfg.validate();
  require(rec.split_form(), "interval classification needs a record with the <1> path");
  require(!rec.times.empty(), "empty trajectory record");
  IntervalDecomposition d;
  d.horizon = rec.times.back();
  const double se = std::sqrt(rec.eps);
  bool good = true;
  std::size_t rho = 0;
  for (std::size_t t = 0; t < rec.times.size(); ++t) {
    if (good) {
      const double elapsed = rec.times[t] - rec.times[rho];
      const double capped = std::min(elapsed, 1.0);
      const SpectralField one = detail::restarted_one(rec, rho, t);
      SpectralField v = rec.x[t];
      for (std::size_t i = 0; i < v.size(); ++i) v[i] -= se * one[i];
      bool exit = std::pow(capped, cfg.gamma) * detail::nearer_distance(v, part, cfg.beta) >= cfg.delta1;
      if (!exit && rec.eps > 0.0) {
        const WickTriple w = WickTriple::from_one(one, rec.times[rho], rec.renorm);
        for (int n = 1; n <= 3 && !exit; ++n) {
          const double weight = n == 1 ? 1.0 : std::pow(capped, (n - 1) * cfg.alpha_prime);
          exit = weight * std::pow(rec.eps, 0.5 * n) * holder_norm(w[n], part, -cfg.alpha) >=
                 std::pow(cfg.delta2, n);
        }
      }
      if (exit) {
        d.nu.push_back(rec.times[t]);
        good = false;
      }
    } else if (rec.times[t] > d.nu.back() &&
               detail::nearer_distance(rec.x[t], part, -cfg.alpha0) <= cfg.delta0) {
      d.rho.push_back(rec.times[t]);
      rho = t;
      good = true;
    }
  }
  // The horizon always cuts the last interval.
  d.open = good ? OpenInterval::good : OpenInterval::bad;
  return d;
}

/// Full decomposition: stopping times, L_k tables, growth values and S_N.
/// Sample spacing must divide 1/2 so that every t_k is a sample time.
inline IntervalDecomposition classify_intervals(const TrajectoryRecord& rec, const StoppingConfig& cfg,
                                                const DyadicPartition& part) {
  const double spacing = rec.sample_dt();
  const double ratio = 0.5 / spacing;
  require(std::abs(ratio - std::round(ratio)) < 1e-6, "sample spacing must divide 1/2");
  IntervalDecomposition d = classify_stopping_times(rec, cfg, part);
  const std::vector<double> sigma = d.sigma();
  for (std::size_t i = 0; i < sigma.size(); ++i) {
    const double nu = d.nu[i], rho = d.rho[i + 1];
    const auto whole = static_cast<int>(std::floor(sigma[i] + 1e-12));
    std::vector<std::array<double, 2>> table;
    for (int k = 1; k <= whole; ++k) {
      table.push_back({compute_Lk(rec, nu, rho, k, 0.0, cfg, part), compute_Lk(rec, nu, rho, k, 0.5, cfg, part)});
    }
    d.growth.push_back(growth_functional(table, sigma[i], cfg));
    d.lk.push_back(std::move(table));
  }
  d.walk = random_walk(d, cfg);
  return d;
}

inline IntervalDecomposition classify_intervals(const TrajectoryRecord& rec, const StoppingConfig& cfg) {
  require(!rec.x.empty(), "empty trajectory record");
  return classify_intervals(rec, cfg, DyadicPartition(rec.x.front().grid()));
}

inline nlohmann::json to_json(const IntervalDecomposition& d) {
  static constexpr const char* kOpen[] = {"none", "good", "bad"};
  nlohmann::json j;
  j["rho"] = d.rho;
  j["nu"] = d.nu;
  j["horizon"] = d.horizon;
  j["open"] = kOpen[static_cast<int>(d.open)];
  j["lk"] = d.lk;
  j["growth"] = d.growth;
  j["walk"] = d.walk;
  return j;
}

inline IntervalDecomposition interval_from_json(const nlohmann::json& j) {
  IntervalDecomposition d;
  d.rho = j.at("rho").get<std::vector<double>>();
  d.nu = j.at("nu").get<std::vector<double>>();
  d.horizon = j.at("horizon").get<double>();
  const std::string open = j.at("open").get<std::string>();
  d.open = open == "good" ? OpenInterval::good : open == "bad" ? OpenInterval::bad : OpenInterval::none;
  d.lk = j.at("lk").get<std::vector<std::vector<std::array<double, 2>>>>();
  d.growth = j.at("growth").get<std::vector<double>>();
  d.walk = j.at("walk").get<std::vector<double>>();
  return d;
}

}  // namespace phi42
