#pragma once

// Cramer-Lundberg comparison walk: S_N = lambda * sum f_i - sum g_i with
// f_i ~ Exp(1) gains and i.i.d. losses g_i.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "phi42/error.hpp"
#include "phi42/parallel.hpp"
#include "phi42/rng.hpp"

namespace phi42 {

struct DeterministicLoss {
  double value;
};
struct ExponentialLoss {
  double mean;
};
struct WeibullLoss {
  double shape;
  double scale;
};
struct EmpiricalLoss {
  std::vector<double> samples;
  std::string source;
};

class LossLaw {
 public:
  using Variant = std::variant<DeterministicLoss, ExponentialLoss, WeibullLoss, EmpiricalLoss>;

  LossLaw(Variant v) : law_(std::move(v)) { validate(); }  // NOLINT(implicit)

  static LossLaw deterministic(double v) { return LossLaw(DeterministicLoss{v}); }
  static LossLaw exponential(double mean) { return LossLaw(ExponentialLoss{mean}); }
  static LossLaw weibull(double shape, double scale) { return LossLaw(WeibullLoss{shape, scale}); }
  static LossLaw empirical(std::vector<double> samples, std::string source = {}) {
    return LossLaw(EmpiricalLoss{std::move(samples), std::move(source)});
  }

  // "det:v", "exp:mean", "weibull:shape,scale", "empirical:path".
  static LossLaw parse(std::string_view text) {
    const auto colon = text.find(':');
    require(colon != std::string_view::npos, "loss law '" + std::string(text) + "' needs the form kind:params");
    const std::string_view kind = text.substr(0, colon);
    const std::string_view rest = text.substr(colon + 1);
    if (kind == "empirical") return empirical(read_samples(std::string(rest)), std::string(rest));
    const std::vector<double> p = parse_numbers(rest);
    if (kind == "det" || kind == "deterministic") {
      require(p.size() == 1, "det loss takes one value");
      return deterministic(p[0]);
    }
    if (kind == "exp" || kind == "exponential") {
      require(p.size() == 1, "exp loss takes one mean");
      return exponential(p[0]);
    }
    if (kind == "weibull") {
      require(p.size() == 2, "weibull loss takes shape,scale");
      return weibull(p[0], p[1]);
    }
    throw ValidationError("unknown loss law '" + std::string(kind) + "'");
  }

  std::string to_string() const {
    std::ostringstream os;
    os.precision(17);
    std::visit(
        [&](const auto& l) {
          using T = std::decay_t<decltype(l)>;
          if constexpr (std::is_same_v<T, DeterministicLoss>) os << "det:" << l.value;
          else if constexpr (std::is_same_v<T, ExponentialLoss>) os << "exp:" << l.mean;
          else if constexpr (std::is_same_v<T, WeibullLoss>) os << "weibull:" << l.shape << ',' << l.scale;
          else os << "empirical:" << l.source;
        },
        law_);
    return os.str();
  }

  double mean() const {
    return std::visit(
        [](const auto& l) -> double {
          using T = std::decay_t<decltype(l)>;
          if constexpr (std::is_same_v<T, DeterministicLoss>) return l.value;
          else if constexpr (std::is_same_v<T, ExponentialLoss>) return l.mean;
          else if constexpr (std::is_same_v<T, WeibullLoss>) return l.scale * std::tgamma(1.0 + 1.0 / l.shape);
          else {
            double s = 0.0;
            for (double x : l.samples) s += x;
            return s / double(l.samples.size());
          }
        },
        law_);
  }

  // Inverse-CDF draw from u in (0,1).
  double draw(double u) const {
    return std::visit(
        [u](const auto& l) -> double {
          using T = std::decay_t<decltype(l)>;
          if constexpr (std::is_same_v<T, DeterministicLoss>) return l.value;
          else if constexpr (std::is_same_v<T, ExponentialLoss>) return -l.mean * std::log(u);
          else if constexpr (std::is_same_v<T, WeibullLoss>) {
            const double e = -std::log(u);
            return l.scale * (l.shape == 0.5 ? e * e : std::pow(e, 1.0 / l.shape));
          } else {
            const auto i = std::min(l.samples.size() - 1, static_cast<std::size_t>(u * double(l.samples.size())));
            return l.samples[i];
          }
        },
        law_);
  }

  bool is_zero() const {
    const auto* d = std::get_if<DeterministicLoss>(&law_);
    return d && d->value == 0.0;
  }

  const Variant& law() const noexcept { return law_; }

 private:
  void validate() const {
    std::visit(
        [](const auto& l) {
          using T = std::decay_t<decltype(l)>;
          if constexpr (std::is_same_v<T, DeterministicLoss>) {
            require(std::isfinite(l.value) && l.value >= 0.0, "deterministic loss must be >= 0");
          } else if constexpr (std::is_same_v<T, ExponentialLoss>) {
            require(std::isfinite(l.mean) && l.mean > 0.0, "exponential loss mean must be > 0");
          } else if constexpr (std::is_same_v<T, WeibullLoss>) {
            require(std::isfinite(l.shape) && l.shape > 0.0, "weibull shape must be > 0");
            require(std::isfinite(l.scale) && l.scale > 0.0, "weibull scale must be > 0");
          } else {
            require(!l.samples.empty(), "empirical loss sample is empty");
            for (double x : l.samples) require(std::isfinite(x) && x >= 0.0, "empirical losses must be >= 0");
          }
        },
        law_);
  }

  static std::vector<double> parse_numbers(std::string_view s) {
    std::vector<double> out;
    while (!s.empty()) {
      const auto comma = s.find(',');
      const std::string_view tok = s.substr(0, comma);
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
      require(ec == std::errc() && ptr == tok.data() + tok.size(), "bad number '" + std::string(tok) + "'");
      out.push_back(v);
      if (comma == std::string_view::npos) break;
      s.remove_prefix(comma + 1);
    }
    return out;
  }

  // One value per line; blank lines and '#' comments skipped.
  static std::vector<double> read_samples(const std::string& path) {
    std::ifstream in(path);
    require(bool(in), "cannot open loss sample file '" + path + "'");
    std::vector<double> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const auto first = line.find_first_not_of(" \t\r");
      if (first == std::string::npos || line[first] == '#') continue;
      const auto last = line.find_last_not_of(" \t\r");
      const std::string_view tok(line.data() + first, last - first + 1);
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
      require(ec == std::errc() && ptr == tok.data() + tok.size(),
              path + ":" + std::to_string(lineno) + ": bad sample '" + std::string(tok) + "'");
      out.push_back(v);
    }
    return out;
  }

  Variant law_;
};

struct WalkSpec {
  double lambda = 1.0;
  LossLaw loss = LossLaw::deterministic(1.0);
  double gain_scale = 1.0;  // f_i = gain_scale * Exp(1)
  double loss_scale = 1.0;  // g_i = loss_scale * loss draw

  // lambda = 0 is admitted for simulation only.
  void validate(bool allow_zero_lambda = false) const {
    require(std::isfinite(lambda) && (allow_zero_lambda ? lambda >= 0.0 : lambda > 0.0),
            allow_zero_lambda ? "lambda >= 0 violated" : "lambda > 0 violated");
    require(std::isfinite(gain_scale) && gain_scale > 0.0, "gain scale must be > 0");
    require(std::isfinite(loss_scale) && loss_scale > 0.0, "loss scale must be > 0");
  }

  double mean_loss() const { return loss_scale * loss.mean(); }
};

// Draws of step i (1-based) on path `replica`: gain at counter 2i, loss at 2i+1.
class WalkDraws {
 public:
  WalkDraws(const WalkSpec& spec, std::uint64_t seed, std::uint64_t replica)
      : spec_(&spec), stream_(CounterRng(seed, replica).stream(0x7275696e)) {}

  double gain(std::uint64_t i) const { return -spec_->gain_scale * std::log(stream_.uniform(2 * i)); }
  double loss(std::uint64_t i) const { return spec_->loss_scale * spec_->loss.draw(stream_.uniform(2 * i + 1)); }

 private:
  const WalkSpec* spec_;
  CounterRng::Stream stream_;
};

struct WalkPath {
  std::vector<double> gains;
  std::vector<double> losses;
  std::vector<double> path;  // S_1 .. S_N (initial capital included)
  bool ruined = false;
  std::optional<std::size_t> ruin_index;  // 1-based N with S_N < 0
};

// Full path of length n_max; ruin is recorded but does not stop the path.
inline WalkPath simulate_walk(const WalkSpec& spec, std::size_t n_max, std::uint64_t seed, std::uint64_t replica = 0,
                              double initial = 0.0) {
  spec.validate(true);
  require(n_max >= 1, "N_max >= 1 violated");
  const WalkDraws draws(spec, seed, replica);
  WalkPath w;
  w.gains.reserve(n_max);
  w.losses.reserve(n_max);
  w.path.reserve(n_max);
  double s = initial;
  for (std::size_t i = 1; i <= n_max; ++i) {
    const double f = draws.gain(i), g = draws.loss(i);
    w.gains.push_back(f);
    w.losses.push_back(g);
    s += spec.lambda * f - g;
    w.path.push_back(s);
    if (s < 0.0 && !w.ruined) {
      w.ruined = true;
      w.ruin_index = i;
    }
  }
  return w;
}

// 1 - E g / lambda; requires the net profit condition E g <= lambda * E f.
inline double survival_exact(const WalkSpec& spec) {
  spec.validate();
  const double premium = spec.lambda * spec.gain_scale;
  const double eg = spec.mean_loss();
  if (eg > premium) throw std::domain_error("net profit condition E g <= lambda violated");
  return 1.0 - eg / premium;
}

struct SurvivalEstimate {
  double mc = 0.0;
  double std_error = 0.0;
  std::size_t paths = 0;
  std::size_t n_max = 0;
  double initial = 0.0;
  // Fraction of paths whose running minimum was attained in the last 10% of steps.
  double late_minimum_fraction = 0.0;
  bool truncation_ok() const { return late_minimum_fraction < 0.01; }
};

namespace detail {

struct WalkOutcome {
  bool ruined;
  bool late_minimum;
};

inline WalkOutcome run_walk(const WalkSpec& spec, std::size_t n_max, std::uint64_t seed, std::uint64_t replica,
                            double initial) {
  const WalkDraws draws(spec, seed, replica);
  const std::size_t late = n_max - n_max / 10;
  double s = initial, lo = initial;
  std::size_t arg = 0;
  for (std::size_t i = 1; i <= n_max; ++i) {
    s += spec.lambda * draws.gain(i) - draws.loss(i);
    if (s < 0.0) return {true, i > late};
    if (s < lo) {
      lo = s;
      arg = i;
    }
  }
  return {false, arg > late};
}

}  // namespace detail

// Unruined fraction over `paths` replicas started at `initial`.
inline SurvivalEstimate survival_mc(const WalkSpec& spec, std::size_t paths, std::size_t n_max, std::uint64_t seed,
                                    double initial = 0.0) {
  spec.validate(true);
  require(paths >= 1, "paths >= 1 violated");
  require(n_max >= 1, "N_max >= 1 violated");
  require(initial >= 0.0, "initial capital >= 0 violated");
  const auto outcomes = parallel_map<detail::WalkOutcome>(
      paths, [&](std::size_t r) { return detail::run_walk(spec, n_max, seed, r, initial); });
  std::size_t survived = 0, late = 0;
  for (const auto& o : outcomes) {
    survived += !o.ruined;
    late += o.late_minimum;
  }
  SurvivalEstimate e;
  e.paths = paths;
  e.n_max = n_max;
  e.initial = initial;
  e.mc = double(survived) / double(paths);
  e.std_error = std::sqrt(e.mc * (1.0 - e.mc) / double(paths));
  e.late_minimum_fraction = double(late) / double(paths);
  return e;
}

// Conditioning on the first step: among paths with S_1 in [u - h, u + h],
// the fraction that never goes negative afterwards.
struct ConditionedSurvival {
  double mc = 0.0;
  double std_error = 0.0;
  std::size_t count = 0;
};

inline ConditionedSurvival survival_given_first_step(const WalkSpec& spec, std::size_t paths, std::size_t n_max,
                                                     std::uint64_t seed, double u, double h) {
  spec.validate();
  require(h > 0.0 && u - h >= 0.0, "conditioning window must sit in [0, inf)");
  struct Out {
    bool selected;
    bool survived;
  };
  const auto outs = parallel_map<Out>(paths, [&](std::size_t r) -> Out {
    const WalkDraws draws(spec, seed, r);
    double s = spec.lambda * draws.gain(1) - draws.loss(1);
    if (std::abs(s - u) > h) return {false, false};
    for (std::size_t i = 2; i <= n_max; ++i) {
      s += spec.lambda * draws.gain(i) - draws.loss(i);
      if (s < 0.0) return {true, false};
    }
    return {true, true};
  });
  ConditionedSurvival c;
  std::size_t alive = 0;
  for (const auto& o : outs) {
    c.count += o.selected;
    alive += o.selected && o.survived;
  }
  if (c.count > 0) {
    c.mc = double(alive) / double(c.count);
    c.std_error = std::sqrt(c.mc * (1.0 - c.mc) / double(c.count));
  }
  return c;
}

// Figure regime: f ~ e^{0.5/eps} Exp(1), g ~ e^{0.1/eps} Weibull(shape 0.5, scale 1), lambda = 1.
inline WalkSpec figure_spec(double eps) {
  require(eps > 0.0 && eps < 1.0, "eps in (0, 1) violated");
  WalkSpec s;
  s.lambda = 1.0;
  s.loss = LossLaw::weibull(0.5, 1.0);
  s.gain_scale = std::exp(0.5 / eps);
  s.loss_scale = std::exp(0.1 / eps);
  return s;
}

inline constexpr std::size_t kFigureSteps = 50;

inline WalkPath figure_walk(double eps, std::uint64_t seed) {
  return simulate_walk(figure_spec(eps), kFigureSteps, seed);
}

// Mean increment per step of the figure walk.
inline double figure_drift(double eps) {
  const WalkSpec s = figure_spec(eps);
  return s.gain_scale - s.mean_loss();
}

}  // namespace phi42
