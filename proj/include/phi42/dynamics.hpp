#pragma once

// Exponential-Euler integration of the deterministic flow, the renormalized
// Galerkin equation and the remainder equation of the X = v + sqrt(eps) <1>
// split. The heat semigroup e^{h Delta} is applied exactly per mode, the
// nonlinearity is explicit and evaluated on the alias-free collocation grid:
//
//     X_{n+1} = e^{h Delta} X_n + phi(h) Pi_N F(X_n) + sqrt(eps) J_n,
//     phi_k(h) = (1 - e^{-q_k h}) / q_k,   q_k = (2 pi |k| / L)^2,
//
// where J_n is the exact heat-semigroup convolution of sqrt(2) dW over the
// step (noise.hpp). The split scheme advances <1> exactly with the OU
// increment of the same Brownian path and v with the remainder nonlinearity.

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "phi42/besov.hpp"
#include "phi42/error.hpp"
#include "phi42/noise.hpp"
#include "phi42/spectral.hpp"

namespace phi42 {

enum class Scheme { direct, split };

inline std::string to_string(Scheme s) { return s == Scheme::direct ? "direct" : "split"; }

inline Scheme parse_scheme(const std::string& s) {
  if (s == "direct") return Scheme::direct;
  if (s == "split") return Scheme::split;
  throw ValidationError("unknown scheme '" + s + "' (expected direct or split)");
}

struct SolverConfig {
  TorusGrid grid;
  double eps = 0.0;
  double dt = 1e-3;
  double horizon = 1.0;
  Scheme scheme = Scheme::direct;
  bool renormalize = true;  // include +3 eps R_N X
  int sample_every = 1;
  double blowup = 1e6;

  void validate() const {
    require(eps >= 0.0, "noise strength eps must be >= 0");
    require(dt > 0.0, "time step dt must be > 0");
    require(horizon > 0.0, "horizon T must be > 0");
    require(sample_every >= 1, "sample_every must be >= 1");
    // Both schemes integrate the stiff linear part exactly, so no
    // dt <= 0.25 / mu_max restriction applies.
  }

  std::int64_t total_steps() const {
    return static_cast<std::int64_t>(std::llround(horizon / dt));
  }
};

/// Per-mode e^{-q h} and phi(h) for a fixed step.
class HeatPropagator {
 public:
  HeatPropagator(const TorusGrid& grid, double h) : h_(h), decay_(grid.mode_count()), phi_(grid.mode_count()) {
    require(h > 0.0, "time step must be positive");
    for (std::size_t i = 0; i < grid.mode_count(); ++i) {
      const double q = grid.laplace_symbol(i);
      decay_[i] = std::exp(-q * h);
      phi_[i] = detail::expm1_ratio(q, h);
    }
  }
  double step() const { return h_; }
  double decay(std::size_t i) const { return decay_[i]; }
  double phi(std::size_t i) const { return phi_[i]; }

 private:
  double h_;
  std::vector<double> decay_;
  std::vector<double> phi_;
};

/// e^{t Delta} f, exact per mode.
inline SpectralField heat_evolve(SpectralField f, double t) {
  require(t >= 0.0, "heat evolution time must be nonnegative");
  for (std::size_t i = 0; i < f.size(); ++i) f[i] *= std::exp(-f.grid().laplace_symbol(i) * t);
  return f;
}

namespace detail {

inline void check_blowup(std::span<const double> values, double limit, double time) {
  for (double x : values) {
    if (!(std::abs(x) <= limit)) {
      throw NumericalInstability("solution exceeded " + std::to_string(limit) + " at t=" +
                                     std::to_string(time),
                                 time);
    }
  }
}

inline SpectralField exp_euler(const SpectralField& state, const SpectralField& forcing,
                               const HeatPropagator& prop) {
  SpectralField out(state.grid());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = prop.decay(i) * state[i] + prop.phi(i) * forcing[i];
  }
  return out;
}

}  // namespace detail

/// Cached coefficients for repeated steps under one SolverConfig.
class Integrator {
 public:
  explicit Integrator(SolverConfig cfg)
      : cfg_(std::move(cfg)), prop_(cfg_.grid, cfg_.dt), renorm_(renorm_constant(cfg_.grid)) {
    cfg_.validate();
  }

  const SolverConfig& config() const { return cfg_; }
  double renorm() const { return renorm_; }
  /// Constant actually used in the counterterm (0 when renormalization is off).
  double counterterm_renorm() const { return cfg_.renormalize ? renorm_ : 0.0; }
  const HeatPropagator& propagator() const { return prop_; }

  /// -X^3 + X (+ 3 eps R X), projected.
  SpectralField drift_direct(const SpectralField& x, double time = 0.0) const {
    CollocationField u = to_physical(x);
    detail::check_blowup(u.values, cfg_.blowup, time);
    const double linear = 1.0 + 3.0 * cfg_.eps * counterterm_renorm();
    for (double& value : u.values) value = -value * value * value + linear * value;
    return to_spectral(x.grid(), u.values);
  }

  /// -(v^3 + 3 v^2 e^{1/2} <1> + 3 v e <2> + e^{3/2} <3>) + v + 2 e^{1/2} <1>, projected;
  /// <2>, <3> are the unprojected Wick powers of `one` on the collocation grid.
  SpectralField drift_remainder(const SpectralField& v, const SpectralField& one,
                                double time = 0.0) const {
    CollocationField vp = to_physical(v);
    const CollocationField up = to_physical(one);
    detail::check_blowup(vp.values, cfg_.blowup, time);
    const double se = std::sqrt(cfg_.eps);
    const double e = cfg_.eps;
    const double e32 = e * se;
    const double r = counterterm_renorm();
    for (std::size_t j = 0; j < vp.values.size(); ++j) {
      const double w = vp.values[j];
      const double u = up.values[j];
      const double two = u * u - r;
      const double three = u * u * u - 3.0 * r * u;
      vp.values[j] = -(w * w * w + 3.0 * w * w * se * u + 3.0 * w * e * two + e32 * three) + w +
                     2.0 * se * u;
    }
    return to_spectral(v.grid(), vp.values);
  }

  SpectralField step_deterministic(const SpectralField& x, double time = 0.0) const {
    CollocationField u = to_physical(x);
    detail::check_blowup(u.values, cfg_.blowup, time);
    for (double& value : u.values) value = -value * value * value + value;
    return detail::exp_euler(x, to_spectral(x.grid(), u.values), prop_);
  }

  SpectralField step_direct(const SpectralField& x, const SpectralField& heat_increment,
                            double time = 0.0) const {
    SpectralField next = detail::exp_euler(x, drift_direct(x, time), prop_);
    if (cfg_.eps > 0.0) {
      const double se = std::sqrt(cfg_.eps);
      for (std::size_t i = 0; i < next.size(); ++i) next[i] += se * heat_increment[i];
    }
    return next;
  }

  SpectralField step_remainder(const SpectralField& v, const SpectralField& one,
                               double time = 0.0) const {
    return detail::exp_euler(v, drift_remainder(v, one, time), prop_);
  }

 private:
  SolverConfig cfg_;
  HeatPropagator prop_;
  double renorm_;
};

inline SpectralField step_direct(const SpectralField& x, const SolverConfig& cfg,
                                 const NoiseStream& noise, std::uint64_t step) {
  require(cfg.scheme == Scheme::direct, "step_direct requires the direct scheme");
  Integrator integrator(cfg);
  const NoiseIncrement inc = noise_increment(cfg.grid, cfg.dt, noise, step);
  return integrator.step_direct(x, inc.heat, static_cast<double>(step) * cfg.dt);
}

/// One remainder step; the triple must be synchronized with v.
inline SpectralField step_remainder(const SpectralField& v, const WickTriple& triple,
                                    const SolverConfig& cfg) {
  return Integrator(cfg).step_remainder(v, triple.one);
}

/// X = v + sqrt(eps) <1>.
inline SpectralField reconstruct(const SpectralField& v, const WickTriple& triple, double eps) {
  require(eps >= 0.0, "noise strength eps must be >= 0");
  SpectralField x = v;
  const double se = std::sqrt(eps);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] += se * triple.one[i];
  return x;
}

/// Decay rate nu_k = (2 pi |k| / L)^2 + 2 of mode-k perturbations of the flow linearized at +-1.
inline double linearized_decay_rate(const TorusGrid& grid, Mode k, double minimizer) {
  require(minimizer == 1.0 || minimizer == -1.0, "linearization point must be -1 or +1");
  return grid.laplace_symbol(grid.index(k)) + 2.0;
}

/// Running solution of one trajectory under either scheme.
class Simulation {
 public:
  Simulation(SpectralField x0, SolverConfig cfg, NoiseStream noise, bool track_wick = false)
      : integrator_(std::move(cfg)),
        noise_(noise),
        track_wick_(track_wick || integrator_.config().scheme == Scheme::split),
        x_(std::move(x0)),
        v_(x_),
        one_(x_.grid()) {
    require(x_.grid() == integrator_.config().grid, "initial condition lives on another grid");
  }

  bool needs_noise() const { return integrator_.config().eps > 0.0 || track_wick_; }

  void step() {
    if (!needs_noise()) {
      advance(nullptr);
      return;
    }
    const SolverConfig& cfg = integrator_.config();
    const NoiseIncrement inc = noise_increment(cfg.grid, cfg.dt, noise_, static_cast<std::uint64_t>(step_));
    advance(&inc);
  }

  /// One step with an externally supplied increment, e.g. shared by coupled runs.
  void advance(const NoiseIncrement* inc) {
    const SolverConfig& cfg = integrator_.config();
    const double t = time();
    require(inc != nullptr || !needs_noise(), "noise increment required for this step");
    if (cfg.scheme == Scheme::direct) {
      x_ = cfg.eps > 0.0 ? integrator_.step_direct(x_, inc->heat, t) : integrator_.step_deterministic(x_, t);
      if (track_wick_) one_ = ou_step(std::move(one_), cfg.dt, inc->ou);
    } else {
      v_ = integrator_.step_remainder(v_, one_, t);
      one_ = ou_step(std::move(one_), cfg.dt, inc->ou);
      x_ = v_;
      const double se = std::sqrt(cfg.eps);
      for (std::size_t i = 0; i < x_.size(); ++i) x_[i] += se * one_[i];
    }
    ++step_;
  }

  const NoiseStream& noise() const { return noise_; }

  double time() const { return static_cast<double>(step_) * integrator_.config().dt; }
  std::int64_t step_index() const { return step_; }
  const SpectralField& X() const { return x_; }
  /// Remainder v = X - sqrt(eps) <1> (split form); requires Wick tracking.
  SpectralField v() const {
    if (integrator_.config().scheme == Scheme::split) return v_;
    SpectralField out = x_;
    const double se = std::sqrt(integrator_.config().eps);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= se * one_[i];
    return out;
  }
  const SpectralField& one() const { return one_; }
  bool tracks_wick() const { return track_wick_; }
  const Integrator& integrator() const { return integrator_; }
  const SolverConfig& config() const { return integrator_.config(); }

 private:
  Integrator integrator_;
  NoiseStream noise_;
  bool track_wick_;
  SpectralField x_;
  SpectralField v_;
  SpectralField one_;
  std::int64_t step_ = 0;
};

struct Diagnostics {
  double mean = 0.0;
  double holder_beta = 0.0;
  double distance_plus = 0.0;   // ||X - 1||_{C^{-alpha0}}
  double distance_minus = 0.0;  // ||X + 1||_{C^{-alpha0}}
};

struct RecordOptions {
  bool store_fields = true;
  bool track_wick = false;
  bool diagnostics = false;
  double beta = 0.2;
  double alpha0 = 0.2;
};

struct TrajectoryRecord {
  double eps = 0.0;
  double renorm = 0.0;
  double dt = 0.0;
  int sample_every = 1;
  std::vector<double> times;
  std::vector<SpectralField> x;
  std::vector<SpectralField> one;  // <1> from time 0; present in split form
  std::vector<Diagnostics> diagnostics;

  bool split_form() const { return !one.empty(); }
  double sample_dt() const { return dt * sample_every; }

  SpectralField remainder(std::size_t i) const {
    SpectralField v = x.at(i);
    const double se = std::sqrt(eps);
    for (std::size_t j = 0; j < v.size(); ++j) v[j] -= se * one.at(i)[j];
    return v;
  }
  WickTriple triple(std::size_t i) const { return WickTriple::from_one(one.at(i), 0.0, renorm); }
};

inline Diagnostics diagnose(const SpectralField& x, const DyadicPartition& partition, double beta,
                            double alpha0) {
  return {field_mean(x), holder_norm(x, partition, beta), holder_norm(x - 1.0, partition, -alpha0),
          holder_norm(x + 1.0, partition, -alpha0)};
}

/// Runs one trajectory to cfg.horizon and samples every cfg.sample_every steps (t = 0 included).
inline TrajectoryRecord simulate(const SpectralField& x0, const SolverConfig& cfg,
                                 const NoiseStream& noise, const RecordOptions& options = {}) {
  Simulation sim(x0, cfg, noise, options.track_wick);
  TrajectoryRecord rec;
  rec.eps = cfg.eps;
  rec.renorm = sim.integrator().renorm();
  rec.dt = cfg.dt;
  rec.sample_every = cfg.sample_every;
  std::optional<DyadicPartition> partition;
  if (options.diagnostics) partition.emplace(cfg.grid);
  auto sample = [&] {
    rec.times.push_back(sim.time());
    if (options.store_fields) {
      rec.x.push_back(sim.X());
      if (sim.tracks_wick()) rec.one.push_back(sim.one());
    }
    if (partition) rec.diagnostics.push_back(diagnose(sim.X(), *partition, options.beta, options.alpha0));
  };
  sample();
  const std::int64_t steps = cfg.total_steps();
  for (std::int64_t n = 1; n <= steps; ++n) {
    sim.step();
    if (n % cfg.sample_every == 0) sample();
  }
  return rec;
}

/// Exponential-Euler trajectory of (d_t - Delta) X = -X^3 + X.
inline TrajectoryRecord deterministic_flow(const SpectralField& x, double horizon, double dt,
                                           int sample_every = 1) {
  SolverConfig cfg{x.grid()};
  cfg.eps = 0.0;
  cfg.dt = dt;
  cfg.horizon = horizon;
  cfg.sample_every = sample_every;
  return simulate(x, cfg, NoiseStream(0, 0));
}

struct RefinementTable {
  std::vector<int> cutoffs;
  /// mean over seeds of sup_{t in [s, T]} ||X_{N_i} - X_{N_{i+1}}||_{C^{-alpha}}
  std::vector<double> mean_distance;
  std::vector<std::vector<double>> per_seed;  // [seed][pair]
};

/// Cauchy distances between consecutive Galerkin levels driven by matched noise.
inline RefinementTable galerkin_refinement_study(const SpectralField& x, double eps,
                                                 std::span<const std::uint64_t> seeds,
                                                 std::span<const int> cutoffs, double dt,
                                                 double horizon, double window_start,
                                                 double alpha, int sample_every = 10) {
  require(cutoffs.size() >= 2, "refinement study needs at least two cutoffs");
  require(!seeds.empty(), "refinement study needs at least one seed");
  for (std::size_t i = 1; i < cutoffs.size(); ++i) {
    require(cutoffs[i] > cutoffs[i - 1], "cutoffs must be increasing");
  }
  RefinementTable table;
  table.cutoffs.assign(cutoffs.begin(), cutoffs.end());
  std::vector<TorusGrid> grids;
  std::vector<DyadicPartition> partitions;
  for (int n : cutoffs) {
    grids.emplace_back(x.grid().length(), n);
    partitions.emplace_back(grids.back());
  }
  for (std::uint64_t seed : seeds) {
    std::vector<Simulation> sims;
    for (const TorusGrid& g : grids) {
      SolverConfig cfg{g};
      cfg.eps = eps;
      cfg.dt = dt;
      cfg.horizon = horizon;
      sims.emplace_back(resample(x, g), cfg, NoiseStream(seed, 0));
    }
    std::vector<double> sup(cutoffs.size() - 1, 0.0);
    const auto steps = static_cast<std::int64_t>(std::llround(horizon / dt));
    for (std::int64_t n = 0; n <= steps; ++n) {
      if (n > 0) {
        for (Simulation& s : sims) s.step();
      }
      const double t = static_cast<double>(n) * dt;
      if (n % sample_every != 0 || t < window_start - 1e-12) continue;
      for (std::size_t i = 0; i + 1 < sims.size(); ++i) {
        const SpectralField diff = resample(sims[i].X(), grids[i + 1]) - sims[i + 1].X();
        sup[i] = std::max(sup[i], holder_norm(diff, partitions[i + 1], -alpha));
      }
    }
    table.per_seed.push_back(sup);
  }
  table.mean_distance.assign(cutoffs.size() - 1, 0.0);
  for (const auto& row : table.per_seed) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      table.mean_distance[i] += row[i] / static_cast<double>(seeds.size());
    }
  }
  return table;
}

}  // namespace phi42
