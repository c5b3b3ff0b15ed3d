#pragma once

// Experiment configuration: sectioned INI files, canonical serialization,
// a stable hash of that text, schema-versioned JSON summaries and initial
// field specifications.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <nlohmann/json.hpp>

#include "phi42/dynamics.hpp"
#include "phi42/error.hpp"
#include "phi42/eyring_kramers.hpp"
#include "phi42/field_io.hpp"
#include "phi42/metastability.hpp"
#include "phi42/rng.hpp"
#include "phi42/spectral.hpp"

namespace phi42 {

inline bool operator==(const StoppingConfig& a, const StoppingConfig& b) {
  return a.delta0 == b.delta0 && a.delta1 == b.delta1 && a.delta2 == b.delta2 && a.alpha0 == b.alpha0 &&
         a.beta == b.beta && a.gamma == b.gamma && a.alpha == b.alpha && a.alpha_prime == b.alpha_prime &&
         a.kappa == b.kappa && a.c0 == b.c0 && a.p0 == b.p0 && a.L0 == b.L0 && a.M0 == b.M0;
}
inline bool operator==(const MetastableSets& a, const MetastableSets& b) {
  return a.delta == b.delta && a.alpha == b.alpha;
}

struct ExperimentConfig {
  // [grid]
  double length = 2.0;
  int cutoff = 16;
  int resolution = 0;  // 0: smallest 5-smooth even M >= 4N + 2
  EigenNorm eigen_norm = EigenNorm::euclidean;
  // [solver]
  double eps = 0.005;
  double dt = 1e-3;
  double horizon = 6.0;
  Scheme scheme = Scheme::direct;
  bool renormalize = true;
  int sample_every = 10;
  double blowup = 1e6;
  // [stopping]
  StoppingConfig stopping;
  // [sets]
  MetastableSets sets;
  // [rng]
  std::uint64_t seed = 1;
  // [run]
  std::size_t replicas = 100;
  std::string output = "phi42_out";
  // [init]
  std::string initial = "const:-1";

  TorusGrid grid() const { return TorusGrid(length, cutoff, resolution, eigen_norm); }

  SolverConfig solver() const {
    SolverConfig s{grid()};
    s.eps = eps;
    s.dt = dt;
    s.horizon = horizon;
    s.scheme = scheme;
    s.renormalize = renormalize;
    s.sample_every = sample_every;
    s.blowup = blowup;
    return s;
  }

  void validate() const {
    require(length > 0.0, "grid length L > 0 violated");
    require(cutoff >= 0, "grid cutoff N >= 0 violated");
    require(resolution == 0 || (resolution >= 4 * cutoff + 2 && resolution % 2 == 0),
            "grid resolution M >= 4N + 2 and even violated");
    (void)grid();
    solver().validate();
    require(blowup > 0.0, "blowup threshold > 0 violated");
    stopping.validate();
    sets.validate();
    require(replicas >= 1, "replicas >= 1 violated");
    require(!output.empty(), "output prefix must be nonempty");
    require(!initial.empty(), "initial field spec must be nonempty");
  }

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

namespace detail {

inline std::string format_double(double x) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);  // shortest round-trip form
  return std::string(buf, ptr);
}

inline double parse_double(const std::string& text, const std::string& where) {
  double v = 0.0;
  const char* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  require(ec == std::errc() && ptr == end, where + ": expected a number, got '" + text + "'");
  return v;
}

template <class Int>
Int parse_integer(const std::string& text, const std::string& where) {
  Int v{};
  const char* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  require(ec == std::errc() && ptr == end, where + ": expected an integer, got '" + text + "'");
  return v;
}

inline bool parse_bool(const std::string& text, const std::string& where) {
  if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
  if (text == "false" || text == "0" || text == "no" || text == "off") return false;
  throw ValidationError(where + ": expected a boolean, got '" + text + "'");
}

// One entry per key: how to print and how to parse it.
struct KeySpec {
  std::string section;
  std::string key;
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, const std::string&, const std::string&)> set;
};

inline KeySpec real_key(std::string section, std::string key, double ExperimentConfig::*f) {
  return {section, key, [f](const ExperimentConfig& c) { return format_double(c.*f); },
          [f](ExperimentConfig& c, const std::string& v, const std::string& w) { c.*f = parse_double(v, w); }};
}

inline KeySpec stopping_key(std::string key, double StoppingConfig::*f) {
  return {"stopping", key, [f](const ExperimentConfig& c) { return format_double(c.stopping.*f); },
          [f](ExperimentConfig& c, const std::string& v, const std::string& w) { c.stopping.*f = parse_double(v, w); }};
}

inline const std::vector<KeySpec>& key_table() {
  static const std::vector<KeySpec> table = [] {
    std::vector<KeySpec> t;
    t.push_back(real_key("grid", "L", &ExperimentConfig::length));
    t.push_back({"grid", "N", [](const ExperimentConfig& c) { return std::to_string(c.cutoff); },
                 [](ExperimentConfig& c, const std::string& v, const std::string& w) { c.cutoff = parse_integer<int>(v, w); }});
    t.push_back({"grid", "M", [](const ExperimentConfig& c) { return std::to_string(c.resolution); },
                 [](ExperimentConfig& c, const std::string& v, const std::string& w) {
                   c.resolution = parse_integer<int>(v, w);
                 }});
    t.push_back({"grid", "eigen_norm",
                 [](const ExperimentConfig& c) { return std::string(c.eigen_norm == EigenNorm::sup ? "sup" : "euclidean"); },
                 [](ExperimentConfig& c, const std::string& v, const std::string& w) {
                   require(v == "sup" || v == "euclidean", w + ": expected euclidean or sup, got '" + v + "'");
                   c.eigen_norm = v == "sup" ? EigenNorm::sup : EigenNorm::euclidean;
                 }});
    t.push_back(real_key("solver", "eps", &ExperimentConfig::eps));
    t.push_back(real_key("solver", "dt", &ExperimentConfig::dt));
    t.push_back(real_key("solver", "T", &ExperimentConfig::horizon));
    t.push_back({"solver", "scheme", [](const ExperimentConfig& c) { return to_string(c.scheme); },
                 [](ExperimentConfig& c, const std::string& v, const std::string& w) {
                   try {
                     c.scheme = parse_scheme(v);
                   } catch (const ValidationError& e) {
                     throw ValidationError(w + ": " + e.what());
                   }
                 }});
    t.push_back({"solver", "renormalize", [](const ExperimentConfig& c) { return std::string(c.renormalize ? "true" : "false"); },
                 [](ExperimentConfig& c, const std::string& v, const std::string& w) { c.renormalize = parse_bool(v, w); }});
    t.push_back({"solver", "sample_every", [](const ExperimentConfig& c) { return std::to_string(c.sample_every); },
                 [](ExperimentConfig& c, const std::string& v, const std::string& w) {
                   c.sample_every = parse_integer<int>(v, w);
                 }});
    t.push_back(real_key("solver", "blowup", &ExperimentConfig::blowup));
    t.push_back(stopping_key("delta0", &StoppingConfig::delta0));
    t.push_back(stopping_key("delta1", &StoppingConfig::delta1));
    t.push_back(stopping_key("delta2", &StoppingConfig::delta2));
    t.push_back(stopping_key("alpha0", &StoppingConfig::alpha0));
    t.push_back(stopping_key("beta", &StoppingConfig::beta));
    t.push_back(stopping_key("gamma", &StoppingConfig::gamma));
    t.push_back(stopping_key("alpha", &StoppingConfig::alpha));
    t.push_back(stopping_key("alpha_prime", &StoppingConfig::alpha_prime));
    t.push_back(stopping_key("kappa", &StoppingConfig::kappa));
    t.push_back(stopping_key("c0", &StoppingConfig::c0));
    t.push_back(stopping_key("p0", &StoppingConfig::p0));
    t.push_back(stopping_key("L0", &StoppingConfig::L0));
    t.push_back(stopping_key("M0", &StoppingConfig::M0));
    t.push_back({"sets", "delta", [](const ExperimentConfig& c) { return format_double(c.sets.delta); },
                 [](ExperimentConfig& c, const std::string& v, const std::string& w) { c.sets.delta = parse_double(v, w); }});
    t.push_back({"sets", "alpha", [](const ExperimentConfig& c) { return format_double(c.sets.alpha); },
                 [](ExperimentConfig& c, const std::string& v, const std::string& w) { c.sets.alpha = parse_double(v, w); }});
    t.push_back({"rng", "seed", [](const ExperimentConfig& c) { return std::to_string(c.seed); },
                 [](ExperimentConfig& c, const std::string& v, const std::string& w) {
                   c.seed = parse_integer<std::uint64_t>(v, w);
                 }});
    t.push_back({"run", "replicas", [](const ExperimentConfig& c) { return std::to_string(c.replicas); },
                 [](ExperimentConfig& c, const std::string& v, const std::string& w) {
                   c.replicas = parse_integer<std::size_t>(v, w);
                 }});
    t.push_back({"run", "output", [](const ExperimentConfig& c) { return c.output; },
                 [](ExperimentConfig& c, const std::string& v, const std::string&) { c.output = v; }});
    t.push_back({"init", "field", [](const ExperimentConfig& c) { return c.initial; },
                 [](ExperimentConfig& c, const std::string& v, const std::string&) { c.initial = v; }});
    return t;
  }();
  return table;
}

// Line numbers of "key =" lines per section, for error messages; ptree drops them.
inline std::map<std::string, int> key_lines(std::istream& in) {
  std::map<std::string, int> lines;
  std::string line, section;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    const auto a = line.find_first_not_of(" \t");
    if (a == std::string::npos || line[a] == ';' || line[a] == '#') continue;
    if (line[a] == '[') {
      const auto b = line.find(']', a);
      section = line.substr(a + 1, b == std::string::npos ? std::string::npos : b - a - 1);
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    std::string key = line.substr(a, eq - a);
    key.erase(key.find_last_not_of(" \t") + 1);
    lines.emplace(section + "." + key, n);
  }
  return lines;
}

}  // namespace detail

/// Canonical INI text: every key, fixed order, shortest round-trip numbers.
inline std::string serialize(const ExperimentConfig& c) {
  std::ostringstream os;
  std::string section;
  for (const auto& k : detail::key_table()) {
    if (k.section != section) {
      if (!section.empty()) os << '\n';
      section = k.section;
      os << '[' << section << "]\n";
    }
    os << k.key << " = " << k.get(c) << '\n';
  }
  return os.str();
}

/// Parses INI text; unknown sections or keys are rejected, missing keys keep their defaults.
inline ExperimentConfig parse_config(const std::string& text, const std::string& source = "<config>") {
  boost::property_tree::ptree tree;
  std::istringstream in(text);
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ValidationError(source + ":" + std::to_string(e.line()) + ": " + e.message());
  }
  std::istringstream again(text);
  const auto lines = detail::key_lines(again);
  auto where = [&](const std::string& section, const std::string& key) {
    const auto it = lines.find(section + "." + key);
    return source + ":" + (it == lines.end() ? std::string("?") : std::to_string(it->second)) + ": [" + section +
           "] " + key;
  };

  ExperimentConfig c;
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) {
      throw ValidationError(where("", section) + ": key outside any section");
    }
    const auto& table = detail::key_table();
    require(std::any_of(table.begin(), table.end(), [&](const detail::KeySpec& k) { return k.section == section; }),
            source + ": unknown section [" + section + "]");
    for (const auto& [key, value] : body) {
      const auto it = std::find_if(table.begin(), table.end(),
                                   [&](const detail::KeySpec& k) { return k.section == section && k.key == key; });
      if (it == table.end()) throw ValidationError(where(section, key) + ": unknown key");
      it->set(c, value.data(), where(section, key));
    }
  }
  c.validate();
  return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(bool(in), "cannot open config file '" + path.string() + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str(), path.string());
}

/// FNV-1a over the canonical serialization, as 16 hex digits.
inline std::string config_hash(const ExperimentConfig& c) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : serialize(c)) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

/// {schema: 1, config_hash, seed, metrics}.
inline nlohmann::json make_summary(const std::string& hash, std::uint64_t seed,
                                   nlohmann::json metrics = nlohmann::json::object()) {
  require(metrics.is_object(), "summary metrics must be a JSON object");
  return {{"schema", 1}, {"config_hash", hash}, {"seed", seed}, {"metrics", std::move(metrics)}};
}

inline void persist_summary(const std::filesystem::path& path, const nlohmann::json& summary) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write summary '" + path.string() + "'");
  out << summary.dump(2) << '\n';
  if (!out) throw std::runtime_error("failed writing summary '" + path.string() + "'");
}

inline nlohmann::json load_summary(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(bool(in), "cannot open summary '" + path.string() + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  require(j.value("schema", 0) == 1, path.string() + ": unsupported summary schema");
  return j;
}

/// Real random field: c + amp * sum over modes of N(0,1) (1 + |k|^2)^{-1}, keyed by seed.
inline SpectralField random_initial_field(const TorusGrid& grid, double mean, double amplitude, std::uint64_t seed) {
  const CounterRng rng(seed, 0x1417);
  SpectralField f(grid);
  for (std::size_t i = 0; i < f.size(); ++i) {
    const Mode k = grid.mode(i);
    if (!in_half_lattice(k) || k == Mode{0, 0}) continue;
    const auto z = rng.normal_pair(std::uint64_t(k.k1 + 100000), std::uint64_t(k.k2 + 100000));
    f[i] = amplitude / (1.0 + euclidean_norm_sq(k)) * Complex{z[0], z[1]};
    f.at({-k.k1, -k.k2}) = std::conj(f[i]);
  }
  f.at({0, 0}) = mean;
  return f;
}

/// "const:c", "mode:c,k1,k2,amp", "random:c,amp,seed", or a field file path.
inline SpectralField parse_field_spec(const std::string& spec, const TorusGrid& grid) {
  const auto colon = spec.find(':');
  const std::string kind = colon == std::string::npos ? "" : spec.substr(0, colon);
  auto numbers = [&] {
    std::vector<double> out;
    std::string_view rest(spec);
    rest.remove_prefix(colon + 1);
    while (true) {
      const auto comma = rest.find(',');
      out.push_back(detail::parse_double(std::string(rest.substr(0, comma)), "field spec '" + spec + "'"));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    return out;
  };
  if (kind == "const") {
    const auto p = numbers();
    require(p.size() == 1, "const field spec takes one value");
    return SpectralField::constant(grid, p[0]);
  }
  if (kind == "mode") {
    const auto p = numbers();
    require(p.size() == 4, "mode field spec takes c,k1,k2,amp");
    const Mode k{int(p[1]), int(p[2])};
    require(double(k.k1) == p[1] && double(k.k2) == p[2], "mode indices must be integers");
    require(grid.contains(k), "mode outside the Galerkin cutoff");
    return SpectralField::constant(grid, p[0]) + SpectralField::cosine(grid, k, p[3]);
  }
  if (kind == "random") {
    const auto p = numbers();
    require(p.size() == 3 && p[2] >= 0.0 && std::floor(p[2]) == p[2], "random field spec takes c,amp,seed");
    return random_initial_field(grid, p[0], p[1], std::uint64_t(p[2]));
  }
  require(std::filesystem::exists(spec), "field spec '" + spec + "' is neither a known form nor an existing file");
  SpectralField f = read_field(spec, grid.length());
  require(f.grid().length() == grid.length(), "field file '" + spec + "' has another torus length");
  return f.grid() == grid ? f : resample(f, grid);
}

}  // namespace phi42
