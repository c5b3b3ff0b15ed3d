// phi42: command-line front end for simulations, coupling, transitions,
// the spectral prefactor, ruin walks, Besov norms and renormalization.
//
// Exit codes: 0 success, 2 invalid input, 3 numerical blow-up.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "phi42/besov.hpp"
#include "phi42/config.hpp"
#include "phi42/dynamics.hpp"
#include "phi42/eyring_kramers.hpp"
#include "phi42/field_io.hpp"
#include "phi42/metastability.hpp"
#include "phi42/noise.hpp"
#include "phi42/ruin.hpp"

namespace {

using namespace phi42;
using nlohmann::json;

constexpr int kValidation = 2;
constexpr int kNumerical = 3;

std::string num(double x) { return detail::format_double(x); }

// CSV writer: provenance comment, header row, '.' decimals, '\n' endings.
class CsvOut {
 public:
  CsvOut(const std::filesystem::path& path, const std::string& hash, std::uint64_t seed,
         const std::vector<std::string>& columns)
      : out_(path, std::ios::binary) {
    if (!out_) throw std::runtime_error("cannot write '" + path.string() + "'");
    out_ << "# phi42 config_hash=" << hash << " seed=" << seed << '\n';
    row(columns);
  }

  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i];
    out_ << '\n';
  }

 private:
  std::ofstream out_;
};

std::filesystem::path with_suffix(const std::string& prefix, const std::string& suffix) {
  const std::filesystem::path p(prefix + suffix);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  return p;
}

// Flags shared by the config-driven subcommands.
struct ConfigFlags {
  std::string path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", path, "experiment config (INI)")->required();
    cmd->add_option("--seed", seed, "override [rng] seed");
    cmd->add_option("--out", out, "override [run] output prefix");
  }

  ExperimentConfig load() const {
    ExperimentConfig c = load_config(path);
    if (seed) c.seed = *seed;
    if (out) c.output = *out;
    c.validate();
    return c;
  }
};

int cmd_simulate(const ConfigFlags& flags, bool intervals) {
  const ExperimentConfig c = flags.load();
  const SolverConfig cfg = c.solver();
  const SpectralField x0 = parse_field_spec(c.initial, cfg.grid);
  RecordOptions opt;
  opt.diagnostics = true;
  opt.beta = c.stopping.beta;
  opt.alpha0 = c.stopping.alpha0;
  opt.track_wick = intervals;
  opt.store_fields = intervals;
  const TrajectoryRecord rec = simulate(x0, cfg, NoiseStream(c.seed, 0), opt);
  const std::string hash = config_hash(c);

  CsvOut csv(with_suffix(c.output, "_trajectory.csv"), hash, c.seed,
             {"t", "mean", "holder_beta", "dist_plus", "dist_minus"});
  for (std::size_t i = 0; i < rec.times.size(); ++i) {
    const Diagnostics& d = rec.diagnostics[i];
    csv.row({num(rec.times[i]), num(d.mean), num(d.holder_beta), num(d.distance_plus), num(d.distance_minus)});
  }
  json metrics = {{"steps", cfg.total_steps()}, {"samples", rec.times.size()}, {"renorm", rec.renorm},
                  {"final_mean", rec.diagnostics.back().mean}};
  if (intervals) metrics["intervals"] = to_json(classify_intervals(rec, c.stopping));
  persist_summary(with_suffix(c.output, "_summary.json"), make_summary(hash, c.seed, metrics));
  std::cout << metrics.dump() << '\n';
  return 0;
}

int cmd_couple(const ConfigFlags& flags, std::size_t seeds, std::size_t points, bool independent, double fit_start,
               double fit_end) {
  require(seeds >= 1, "couple needs --seeds >= 1");
  const ExperimentConfig c = flags.load();
  const SolverConfig cfg = c.solver();
  const SpectralField center = parse_field_spec(c.initial, cfg.grid);
  CouplingOptions opt;
  opt.beta = c.stopping.beta;
  opt.alpha0 = c.stopping.alpha0;
  opt.independent_noise = independent;
  opt.fit_start = fit_start;
  opt.fit_end = fit_end;
  require(fit_end <= c.horizon, "fit window must end by the horizon T");
  const auto initials = ball_grid(center, c.stopping.delta0, points, opt.alpha0);
  const auto results = parallel_map<CouplingResult>(
      seeds, [&](std::size_t i) { return coupled_ensemble(initials, cfg, c.seed + i, opt); });
  const std::string hash = config_hash(c);
  CsvOut csv(with_suffix(c.output, "_coupling.csv"), hash, c.seed,
             {"seed", "slope", "slope_stderr", "r_squared", "initial_distance"});
  std::vector<double> slopes;
  for (std::size_t i = 0; i < seeds; ++i) {
    const CouplingResult& r = results[i];
    slopes.push_back(r.fit.slope);
    csv.row({std::to_string(c.seed + i), num(r.fit.slope), num(r.fit.slope_stderr), num(r.fit.r_squared),
             num(r.initial_distance)});
  }
  const CouplingSummary s = summarize_slopes(slopes);
  const json metrics = {{"seeds", seeds},
                        {"points", points},
                        {"independent_noise", independent},
                        {"fit_window", {fit_start, fit_end}},
                        {"slope_mean", s.slope_mean},
                        {"slope_sd", s.slope_sd},
                        {"pass_fraction", s.pass_fraction}};
  persist_summary(with_suffix(c.output, "_summary.json"), make_summary(hash, c.seed, metrics));
  std::cout << metrics.dump() << '\n';
  return 0;
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) out.push_back(detail::parse_double(tok, "list '" + text + "'"));
  require(!out.empty(), "empty list");
  return out;
}

int cmd_transition(const ConfigFlags& flags, const std::string& eps_grid, std::optional<std::size_t> replicas,
                   double horizon) {
  ExperimentConfig c = flags.load();
  if (replicas) c.replicas = *replicas;
  const std::vector<double> eps = parse_list(eps_grid);
  const SpectralField x0 = parse_field_spec(c.initial, c.grid());
  const std::string hash = config_hash(c);
  CsvOut csv(with_suffix(c.output, "_hitting.csv"), hash, c.seed, {"eps", "replica", "time", "hit"});
  std::vector<double> means, errors;
  json per_eps = json::array();
  for (double e : eps) {
    SolverConfig cfg = c.solver();
    cfg.eps = e;
    cfg.dt = std::min(cfg.dt, e / 10.0);
    const TransitionSample s = transition_times(x0, cfg, c.sets, c.seed, c.replicas, horizon);
    for (std::size_t r = 0; r < s.results.size(); ++r)
      csv.row({num(e), std::to_string(r), num(s.results[r].time), s.results[r].hit ? "1" : "0"});
    const Estimate m = s.mean();
    means.push_back(m.mean);
    errors.push_back(m.std_error);
    json entry = {{"eps", e}, {"dt", cfg.dt}, {"mean", m.mean}, {"std_error", m.std_error}, {"timeouts", s.timeouts()}};
    const auto hits = s.hit_times();
    if (hits.size() >= 8) entry["tail_r_squared"] = tail_log_survival_fit(hits).r_squared;
    per_eps.push_back(entry);
  }
  json metrics = {{"per_eps", per_eps}, {"barrier", barrier(c.length)}};
  if (eps.size() >= 3) {
    const ArrheniusFit fit = arrhenius_fit(eps, means, errors);
    metrics["arrhenius"] = {{"slope", fit.slope()},
                            {"slope_stderr", fit.fit.slope_stderr},
                            {"intercept", fit.intercept()},
                            {"log_prefactor", prefactor(c.length, c.cutoff).log_value}};
  }
  persist_summary(with_suffix(c.output, "_summary.json"), make_summary(hash, c.seed, metrics));
  std::cout << metrics.dump() << '\n';
  return 0;
}

int cmd_prefactor(double length, int ntrunc) {
  const Prefactor p = prefactor(length, ntrunc);
  std::cout << json{{"prefactor", p.value}, {"tail_bound", p.tail_bound}, {"barrier", p.barrier}}.dump() << '\n';
  return 0;
}

int cmd_ruin(bool figure, double eps, double lambda, const std::string& loss, std::size_t paths, std::size_t nmax,
             std::uint64_t seed, const std::string& out) {
  if (figure) {
    const WalkPath w = figure_walk(eps, seed);
    std::ostream* os = &std::cout;
    std::ofstream file;
    if (!out.empty()) {
      file.open(with_suffix(out, "_figure.csv"), std::ios::binary);
      if (!file) throw std::runtime_error("cannot write figure CSV");
      os = &file;
    }
    *os << "# phi42 figure eps=" << num(eps) << " seed=" << seed << '\n' << "N,f,g,S\n";
    for (std::size_t i = 0; i < w.path.size(); ++i)
      *os << i + 1 << ',' << num(w.gains[i]) << ',' << num(w.losses[i]) << ',' << num(w.path[i]) << '\n';
    return 0;
  }
  WalkSpec spec;
  spec.lambda = lambda;
  spec.loss = LossLaw::parse(loss);
  const double exact = survival_exact(spec);
  const SurvivalEstimate e = survival_mc(spec, paths, nmax, seed);
  std::cout << json{{"exact", exact},
                    {"mc", e.mc},
                    {"stderr", e.std_error},
                    {"paths", e.paths},
                    {"nmax", e.n_max},
                    {"late_minimum_fraction", e.late_minimum_fraction}}
                   .dump()
            << '\n';
  return 0;
}

int cmd_besov(const std::string& field, double length, int cutoff, double alpha, const std::string& p,
              const std::string& q) {
  auto exponent = [](const std::string& s) {
    return s == "inf" ? kInfinity : detail::parse_double(s, "Besov exponent");
  };
  const TorusGrid grid(length, cutoff);
  const SpectralField f = parse_field_spec(field, grid);
  const double pp = exponent(p), qq = exponent(q);
  require(pp >= 1.0 && qq >= 1.0, "Besov exponents p, q >= 1 violated");
  std::cout << json{{"norm", besov_norm(f, alpha, pp, qq)}, {"holder", holder_norm(f, alpha)}, {"alpha", alpha}}.dump()
            << '\n';
  return 0;
}

int cmd_renorm(double length, int cutoff, const std::string& norm) {
  require(norm == "euclidean" || norm == "sup", "--norm must be euclidean or sup");
  const double r = renorm_constant(length, cutoff, norm == "sup" ? EigenNorm::sup : EigenNorm::euclidean);
  std::cout << json{{"L", length}, {"N", cutoff}, {"renorm", r}}.dump() << '\n';
  return 0;
}

int run(int argc, char** argv) {
  CLI::App app{"phi42: renormalized stochastic Allen-Cahn toolkit"};
  app.require_subcommand(1);

  ConfigFlags sim_flags;
  bool intervals = false;
  auto* sim = app.add_subcommand("simulate", "run one trajectory; CSV of diagnostics plus JSON summary");
  sim_flags.attach(sim);
  sim->add_flag("--intervals", intervals, "classify good/bad intervals (needs split-form sampling)");

  ConfigFlags couple_flags;
  std::size_t seeds = 1, points = 2;
  bool independent = false;
  auto* couple = app.add_subcommand("couple", "coupled runs from the delta0 ball of the initial field");
  couple_flags.attach(couple);
  couple->add_option("--seeds", seeds, "number of seeds")->required();
  couple->add_option("--points", points, "initial conditions in the ball grid")->check(CLI::Range(2, 1000));
  couple->add_flag("--independent", independent, "independent noises (negative control)");
  double fit_start = 1.0, fit_end = 6.0;
  couple->add_option("--fit-start", fit_start, "start of the log-ratio fit window");
  couple->add_option("--fit-end", fit_end, "end of the log-ratio fit window");

  ConfigFlags trans_flags;
  std::string eps_grid;
  std::optional<std::size_t> replicas;
  double horizon = 1e5;
  auto* trans = app.add_subcommand("transition", "hitting times of B from the initial field, Arrhenius fit");
  trans_flags.attach(trans);
  trans->add_option("--eps-grid", eps_grid, "comma-separated eps values")->required();
  trans->add_option("--replicas", replicas, "override [run] replicas");
  trans->add_option("--horizon", horizon, "timeout per replica");

  double pre_l = 2.0;
  int ntrunc = 64;
  auto* pre = app.add_subcommand("prefactor", "spectral prefactor, tail bound and barrier as JSON");
  pre->add_option("--L", pre_l, "torus length")->required();
  pre->add_option("--ntrunc", ntrunc, "mode truncation")->required();

  bool figure = false;
  double fig_eps = 0.01, lambda = 2.0;
  std::string loss = "det:1", ruin_out;
  std::size_t paths = 100000, nmax = 10000;
  std::uint64_t ruin_seed = 1;
  auto* ruin = app.add_subcommand("ruin", "Cramer-Lundberg survival: closed form against Monte Carlo");
  ruin->add_flag("--figure", figure, "emit one figure-regime path as CSV");
  ruin->add_option("--eps", fig_eps, "eps of the figure regime");
  ruin->add_option("--lambda", lambda, "gain scale");
  ruin->add_option("--loss", loss, "det:v | exp:mean | weibull:shape,scale | empirical:path");
  ruin->add_option("--paths", paths, "Monte Carlo paths");
  ruin->add_option("--nmax", nmax, "steps per path");
  ruin->add_option("--seed", ruin_seed, "seed");
  ruin->add_option("--out", ruin_out, "prefix for the figure CSV (stdout otherwise)");

  std::string field = "const:0", bp = "inf", bq = "inf";
  double b_l = 2.0, b_alpha = 0.0;
  int b_n = 16;
  auto* besov = app.add_subcommand("besov", "Besov and Hoelder norms of a field");
  besov->add_option("--field", field, "field spec or file")->required();
  besov->add_option("--L", b_l, "torus length");
  besov->add_option("--N", b_n, "cutoff");
  besov->add_option("--alpha", b_alpha, "regularity");
  besov->add_option("--p", bp, "integrability (number or inf)");
  besov->add_option("--q", bq, "summability (number or inf)");

  double r_l = 2.0;
  int r_n = 16;
  std::string r_norm = "euclidean";
  auto* renorm = app.add_subcommand("renorm", "renormalization constant R_N as JSON");
  renorm->add_option("--L", r_l, "torus length")->required();
  renorm->add_option("--N", r_n, "cutoff")->required();
  renorm->add_option("--norm", r_norm, "euclidean or sup");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kValidation;
  }

  if (*sim) return cmd_simulate(sim_flags, intervals);
  if (*couple) return cmd_couple(couple_flags, seeds, points, independent, fit_start, fit_end);
  if (*trans) return cmd_transition(trans_flags, eps_grid, replicas, horizon);
  if (*pre) return cmd_prefactor(pre_l, ntrunc);
  if (*ruin) return cmd_ruin(figure, fig_eps, lambda, loss, paths, nmax, ruin_seed, ruin_out);
  if (*besov) return cmd_besov(field, b_l, b_n, b_alpha, bp, bq);
  return cmd_renorm(r_l, r_n, r_norm);
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const phi42::NumericalInstability& e) {
    std::cerr << "phi42: numerical instability at t=" << e.time() << ": " << e.what() << '\n';
    return kNumerical;
  } catch (const std::logic_error& e) {  // validation, domain and range errors
    std::cerr << "phi42: " << e.what() << '\n';
    return kValidation;
  } catch (const std::exception& e) {
    std::cerr << "phi42: " << e.what() << '\n';
    return 1;
  }
}
