#ifndef BCM_CONFIG_HPP
#define BCM_CONFIG_HPP

// Experiment configuration: an INI file with sections
//   [domain] [speed] [time] [gamma] [tau] [minimize] [noise] [oracle]
//   [reconstruct] [forward] [verify] [output]
// Unknown sections and keys are rejected. Relative paths resolve against the
// directory of the config file.

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "bcm/errors.hpp"
#include "bcm/fields.hpp"
#include "bcm/forward.hpp"
#include "bcm/geometry.hpp"
#include "bcm/influence.hpp"
#include "bcm/io.hpp"
#include "bcm/minimize.hpp"
#include "bcm/reconstruct.hpp"

namespace bcm {

struct VerifyTolerances {
  double blagovestchenskii = 0.02;
  double cross_term = 0.02;
  double adjoint = 1e-12;
  double finite_speed = 1e-6;
  double symmetry = 1e-3;
};

struct ExperimentConfig {
  DomainSpec domain;
  SpeedModel speed = ConstantSpeed{};
  std::filesystem::path speed_file;  // sampled profile, resolved after the grid is built

  double T = 1.0;
  double cfl = kMaxCfl;
  std::optional<double> dt;

  std::optional<std::vector<std::size_t>> gamma_nodes;  // empty optional: whole boundary

  std::string tau_kind = "constant";  // constant | list | file
  double tau_value = 0.0;
  std::vector<double> tau_values;
  std::filesystem::path tau_file;

  std::vector<double> alphas = geometric_schedule();
  CgOptions cg;
  bool warm_start = true;
  bool extrapolate = false;

  NoiseModel noise;

  std::string oracle = "geometric";  // geometric | pde | none
  double oracle_eps = 0.0;
  double oracle_margin = -1.0;
  bool pde_extrapolate = true;
  std::optional<double> oracle_horizon;

  std::string seeds_kind = "fan";  // fan | constant | list
  std::size_t seed_count = 9;
  std::vector<double> seed_constants;
  std::vector<std::vector<double>> seed_lists;
  AscentOptions ascent;
  double dedupe_tol = 1e-2;

  std::string source_kind = "pulse";  // pulse | zero | file
  std::filesystem::path source_file;
  double pulse_duration = 0.1;
  double pulse_amplitude = 1.0;
  std::size_t pulse_node = 0;
  bool write_snapshot = true;

  int pairs = 10;
  VerifyTolerances tol;

  std::filesystem::path out_dir = "out";
  std::filesystem::path replay_dir;
  std::filesystem::path record_dir;

  // command-line controlled
  bool verification = true;
  unsigned jobs = 1;
  std::uint64_t seed = 1;

  /// Effective settings as section -> key -> text, for report provenance.
  std::map<std::string, std::map<std::string, std::string>> echo;
};

namespace detail {

inline const std::map<std::string, std::set<std::string>>& known_keys() {
  static const std::map<std::string, std::set<std::string>> keys = {
      {"domain", {"shape", "length", "width", "height", "radius", "resolution", "boundary_resolution"}},
      {"speed", {"profile", "c0", "gx", "gy", "amplitude", "wavenumber", "center_x", "center_y", "width", "file"}},
      {"time", {"T", "cfl", "dt"}},
      {"gamma", {"nodes"}},
      {"tau", {"kind", "value", "values", "file"}},
      {"minimize", {"alphas", "tol", "max_iters", "warm_start", "extrapolate"}},
      {"noise", {"level", "seed"}},
      {"oracle", {"backend", "eps", "margin", "pde_extrapolate", "horizon"}},
      {"reconstruct",
       {"seeds", "seed_count", "constants", "profiles", "step_tol", "bisection_steps", "max_cycles", "dedupe_tol",
        "order"}},
      {"forward", {"source", "file", "pulse_duration", "pulse_amplitude", "pulse_node", "snapshot"}},
      {"verify", {"pairs", "blagovestchenskii_tol", "cross_term_tol", "adjoint_tol", "finite_speed_tol", "symmetry_tol"}},
      {"output", {"dir", "replay_dir", "record_dir"}},
  };
  return keys;
}

class Section {
 public:
  Section(std::string name, const boost::property_tree::ptree* tree, ExperimentConfig& cfg)
      : name_(std::move(name)), tree_(tree), cfg_(cfg) {}

  bool has(const std::string& key) const { return tree_ && tree_->find(key) != tree_->not_found(); }

  std::string text(const std::string& key, const std::string& fallback) const {
    std::string v = fallback;
    if (has(key)) v = tree_->get<std::string>(key);
    const auto b = v.find_first_not_of(" \t"), e = v.find_last_not_of(" \t");
    v = b == std::string::npos ? std::string() : v.substr(b, e - b + 1);
    cfg_.echo[name_][key] = v;
    return v;
  }

  double number(const std::string& key, double fallback) const {
    const std::string s = text(key, io::format_double(fallback));
    return parse_double(key, s);
  }

  long long integer(const std::string& key, long long fallback) const {
    const std::string s = text(key, std::to_string(fallback));
    try {
      std::size_t used = 0;
      const long long v = std::stoll(s, &used);
      if (used == s.size()) return v;
    } catch (const std::exception&) {
    }
    throw ConfigurationError("[" + name_ + "] " + key + ": expected an integer, got '" + s + "'");
  }

  bool flag(const std::string& key, bool fallback) const {
    const std::string s = text(key, fallback ? "true" : "false");
    if (s == "true" || s == "on" || s == "yes" || s == "1") return true;
    if (s == "false" || s == "off" || s == "no" || s == "0") return false;
    throw ConfigurationError("[" + name_ + "] " + key + ": expected true/false, got '" + s + "'");
  }

  std::vector<double> numbers(const std::string& key, const std::vector<double>& fallback) const {
    std::string joined;
    for (double v : fallback) joined += (joined.empty() ? "" : " ") + io::format_double(v);
    return parse_list(key, text(key, joined));
  }

  std::vector<double> parse_list(const std::string& key, const std::string& s) const {
    std::vector<double> out;
    std::string item;
    std::string spaced = s;
    for (char& ch : spaced)
      if (ch == ',') ch = ' ';
    std::istringstream ss(spaced);
    while (ss >> item) out.push_back(parse_double(key, item));
    return out;
  }

  const std::string& name() const { return name_; }

 private:
  double parse_double(const std::string& key, const std::string& s) const {
    try {
      std::size_t used = 0;
      const double v = std::stod(s, &used);
      if (used == s.size()) return v;
    } catch (const std::exception&) {
    }
    throw ConfigurationError("[" + name_ + "] " + key + ": expected a number, got '" + s + "'");
  }

  std::string name_;
  const boost::property_tree::ptree* tree_;
  ExperimentConfig& cfg_;
};

inline std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  if (p.empty()) return {};
  const std::filesystem::path path(p);
  return path.is_absolute() ? path : base / path;
}

inline void require_file(const std::filesystem::path& p, const char* what) {
  if (!std::filesystem::is_regular_file(p)) throw ConfigurationError(std::string(what) + " not found: " + p.string());
}

}  // namespace detail

/// Parses INI text. `base` resolves relative paths.
inline ExperimentConfig parse_config(const std::string& ini_text, const std::filesystem::path& base = ".") {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    std::istringstream in(ini_text);
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigurationError("config line " + std::to_string(e.line()) + ": " + e.message());
  }
  for (const auto& [section, body] : tree) {
    const auto it = detail::known_keys().find(section);
    if (it == detail::known_keys().end()) throw ConfigurationError("unknown config section [" + section + "]");
    if (body.empty() && !body.data().empty())
      throw ConfigurationError("config key '" + section + "' must be inside a section");
    for (const auto& [key, value] : body)
      if (!it->second.count(key)) throw ConfigurationError("unknown key '" + key + "' in [" + section + "]");
  }

  ExperimentConfig cfg;
  auto section = [&](const std::string& name) {
    const auto it = tree.find(name);
    return detail::Section(name, it == tree.not_found() ? nullptr : &it->second, cfg);
  };

  {
    auto s = section("domain");
    const std::string shape = s.text("shape", "interval");
    if (shape == "interval") {
      cfg.domain = DomainSpec::interval(s.number("length", 1.0), s.number("resolution", 100.0));
    } else if (shape == "rectangle") {
      cfg.domain = DomainSpec::rectangle(s.number("width", 1.0), s.number("height", 1.0), s.number("resolution", 50.0));
    } else if (shape == "disk") {
      const long long nb = s.integer("boundary_resolution", 64);
      if (nb < 2) throw ConfigurationError("[domain] boundary_resolution must be at least 2");
      cfg.domain = DomainSpec::disk(s.number("radius", 1.0), s.number("resolution", 50.0), static_cast<std::size_t>(nb));
    } else {
      throw ConfigurationError("[domain] shape must be interval, rectangle or disk, got '" + shape + "'");
    }
    cfg.domain.validate();
  }
  {
    auto s = section("speed");
    const std::string profile = s.text("profile", "constant");
    const double c0 = s.number("c0", 1.0);
    if (profile == "constant") {
      cfg.speed = ConstantSpeed{c0};
    } else if (profile == "linear") {
      cfg.speed = LinearSpeed{c0, s.number("gx", 0.0), s.number("gy", 0.0)};
    } else if (profile == "sine") {
      cfg.speed = SineSpeed{c0, s.number("amplitude", 0.0), s.number("wavenumber", 1.0)};
    } else if (profile == "smooth-bump" || profile == "bump") {
      cfg.speed = BumpSpeed{c0, s.number("amplitude", 0.0), {s.number("center_x", 0.5), s.number("center_y", 0.5)},
                            s.number("width", 0.25)};
    } else if (profile == "sampled" || profile == "file") {
      cfg.speed_file = detail::resolve(base, s.text("file", ""));
      detail::require_file(cfg.speed_file, "speed file");
      cfg.speed = SampledSpeed{};
    } else {
      throw ConfigurationError("[speed] unknown profile '" + profile + "'");
    }
  }
  {
    auto s = section("time");
    cfg.T = s.number("T", 1.0);
    if (!(cfg.T > 0.0)) throw ConfigurationError("[time] T must be positive");
    cfg.cfl = s.number("cfl", kMaxCfl);
    if (s.has("dt")) cfg.dt = s.number("dt", 0.0);
  }
  {
    auto s = section("gamma");
    const std::string nodes = s.text("nodes", "all");
    if (nodes != "all") {
      std::vector<std::size_t> list;
      for (double v : s.parse_list("nodes", nodes)) {
        if (v < 0.0 || v != std::floor(v)) throw ConfigurationError("[gamma] nodes must be non-negative integers");
        list.push_back(static_cast<std::size_t>(v));
      }
      if (list.empty()) throw ConfigurationError("[gamma] nodes is empty");
      cfg.gamma_nodes = std::move(list);
    }
  }
  {
    auto s = section("tau");
    cfg.tau_kind = s.text("kind", "constant");
    if (cfg.tau_kind == "constant") {
      cfg.tau_value = s.number("value", 0.0);
    } else if (cfg.tau_kind == "list") {
      cfg.tau_values = s.numbers("values", {});
      if (cfg.tau_values.empty()) throw ConfigurationError("[tau] values is empty");
    } else if (cfg.tau_kind == "file") {
      cfg.tau_file = detail::resolve(base, s.text("file", ""));
      detail::require_file(cfg.tau_file, "tau file");
    } else {
      throw ConfigurationError("[tau] kind must be constant, list or file");
    }
  }
  {
    auto s = section("minimize");
    cfg.alphas = s.numbers("alphas", cfg.alphas);
    validate_schedule(cfg.alphas);
    cfg.cg.tol = s.number("tol", 1e-8);
    const long long iters = s.integer("max_iters", 5000);
    if (!(cfg.cg.tol > 0.0) || iters < 1) throw ConfigurationError("[minimize] tol and max_iters must be positive");
    cfg.cg.max_iters = static_cast<int>(iters);
    cfg.warm_start = s.flag("warm_start", true);
    const std::string ex = s.text("extrapolate", "none");
    if (ex != "none" && ex != "sqrt_alpha") throw ConfigurationError("[minimize] extrapolate must be none or sqrt_alpha");
    cfg.extrapolate = ex == "sqrt_alpha";
  }
  {
    auto s = section("noise");
    cfg.noise.level = s.number("level", 0.0);
    if (cfg.noise.level < 0.0) throw ConfigurationError("[noise] level must be non-negative");
    const long long seed = s.integer("seed", 0);
    if (seed < 0) throw ConfigurationError("[noise] seed must be non-negative");
    cfg.noise.seed = static_cast<std::uint64_t>(seed);
  }
  {
    auto s = section("oracle");
    cfg.oracle = s.text("backend", "geometric");
    if (cfg.oracle != "geometric" && cfg.oracle != "pde" && cfg.oracle != "none")
      throw ConfigurationError("[oracle] backend must be geometric, pde or none");
    cfg.oracle_eps = s.number("eps", 0.0);
    cfg.oracle_margin = s.number("margin", -1.0);
    cfg.pde_extrapolate = s.flag("pde_extrapolate", true);
    if (s.has("horizon")) cfg.oracle_horizon = s.number("horizon", cfg.T);
  }
  {
    auto s = section("reconstruct");
    cfg.seeds_kind = s.text("seeds", "fan");
    const long long count = s.integer("seed_count", 9);
    if (count < 0) throw ConfigurationError("[reconstruct] seed_count must be non-negative");
    cfg.seed_count = static_cast<std::size_t>(count);
    if (cfg.seeds_kind == "constant") {
      cfg.seed_constants = s.numbers("constants", {});
    } else if (cfg.seeds_kind == "list") {
      // profiles separated by ';'
      std::stringstream ss(s.text("profiles", ""));
      std::string item;
      while (std::getline(ss, item, ';')) {
        auto values = s.parse_list("profiles", item);
        if (!values.empty()) cfg.seed_lists.push_back(std::move(values));
      }
    } else if (cfg.seeds_kind != "fan") {
      throw ConfigurationError("[reconstruct] seeds must be fan, constant or list");
    }
    cfg.ascent.step_tol = s.number("step_tol", 1e-3);
    cfg.ascent.bisection_steps = static_cast<int>(s.integer("bisection_steps", 12));
    cfg.ascent.max_cycles = static_cast<int>(s.integer("max_cycles", 50));
    cfg.dedupe_tol = s.number("dedupe_tol", 1e-2);
    if (!(cfg.ascent.step_tol > 0.0) || cfg.ascent.bisection_steps < 1 || cfg.ascent.max_cycles < 1 ||
        !(cfg.dedupe_tol >= 0.0))
      throw ConfigurationError("[reconstruct] step_tol, bisection_steps, max_cycles must be positive");
    const std::string order = s.text("order", "auto");
    if (order != "auto")
      for (double v : s.parse_list("order", order)) cfg.ascent.order.push_back(static_cast<std::size_t>(v));
  }
  {
    auto s = section("forward");
    cfg.source_kind = s.text("source", "pulse");
    if (cfg.source_kind == "file") {
      cfg.source_file = detail::resolve(base, s.text("file", ""));
      detail::require_file(cfg.source_file, "source file");
    } else if (cfg.source_kind != "pulse" && cfg.source_kind != "zero") {
      throw ConfigurationError("[forward] source must be pulse, zero or file");
    }
    cfg.pulse_duration = s.number("pulse_duration", 0.1);
    cfg.pulse_amplitude = s.number("pulse_amplitude", 1.0);
    const long long node = s.integer("pulse_node", 0);
    if (node < 0) throw ConfigurationError("[forward] pulse_node must be non-negative");
    cfg.pulse_node = static_cast<std::size_t>(node);
    cfg.write_snapshot = s.flag("snapshot", true);
  }
  {
    auto s = section("verify");
    cfg.pairs = static_cast<int>(s.integer("pairs", 10));
    if (cfg.pairs < 1) throw ConfigurationError("[verify] pairs must be positive");
    cfg.tol.blagovestchenskii = s.number("blagovestchenskii_tol", cfg.tol.blagovestchenskii);
    cfg.tol.cross_term = s.number("cross_term_tol", cfg.tol.cross_term);
    cfg.tol.adjoint = s.number("adjoint_tol", cfg.tol.adjoint);
    cfg.tol.finite_speed = s.number("finite_speed_tol", cfg.tol.finite_speed);
    cfg.tol.symmetry = s.number("symmetry_tol", cfg.tol.symmetry);
  }
  {
    auto s = section("output");
    cfg.out_dir = detail::resolve(base, s.text("dir", "out"));
    const std::string replay = s.text("replay_dir", "");
    if (!replay.empty()) {
      cfg.replay_dir = detail::resolve(base, replay);
      if (!std::filesystem::is_directory(cfg.replay_dir))
        throw ConfigurationError("replay directory not found: " + cfg.replay_dir.string());
    }
    const std::string record = s.text("record_dir", "");
    if (!record.empty()) cfg.record_dir = detail::resolve(base, record);
  }
  return cfg;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigurationError("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  const auto base = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
  return parse_config(ss.str(), base);
}

// ---------------------------------------------------------------------------
// Building the experiment objects

inline SpeedField build_speed(const ExperimentConfig& cfg) {
  if (std::holds_alternative<SampledSpeed>(cfg.speed)) {
    auto grid = std::make_shared<const Grid>(build_grids(cfg.domain));
    return SpeedField(grid, io::read_speed_csv(cfg.speed_file, grid->interior_size()));
  }
  return make_speed(cfg.domain, cfg.speed);
}

inline SolverSettings build_settings(const ExperimentConfig& cfg, const SpeedField& c) {
  SolverSettings s = cfg.dt ? SolverSettings::with_dt(c, cfg.T, *cfg.dt) : SolverSettings::for_speed(c, cfg.T, cfg.cfl);
  s.validate();
  return s;
}

inline MeasurementDevice build_device(const ExperimentConfig& cfg, const SpeedField& c) {
  const SolverSettings s = build_settings(cfg, c);
  if (!cfg.replay_dir.empty()) {
    const auto w = c.boundary_measure_weights();
    return MeasurementDevice::replay(cfg.replay_dir, s.time_grid(), {w.begin(), w.end()}, cfg.noise);
  }
  MeasurementDevice device(c, s, cfg.noise);
  if (!cfg.record_dir.empty()) device.record_to(cfg.record_dir);
  return device;
}

inline BoundarySubset build_gamma(const ExperimentConfig& cfg, std::size_t boundary_size) {
  return cfg.gamma_nodes ? BoundarySubset::of(*cfg.gamma_nodes, boundary_size) : BoundarySubset::all(boundary_size);
}

inline BoundaryProfile build_tau(const ExperimentConfig& cfg, std::size_t boundary_size) {
  if (cfg.tau_kind == "constant") return BoundaryProfile::constant(boundary_size, cfg.tau_value);
  if (cfg.tau_kind == "file") return io::read_profile_csv(cfg.tau_file, boundary_size);
  if (cfg.tau_values.size() == 1) return BoundaryProfile::constant(boundary_size, cfg.tau_values[0]);
  if (cfg.tau_values.size() != boundary_size)
    throw ConfigurationError("[tau] values has " + std::to_string(cfg.tau_values.size()) + " entries, boundary has " +
                             std::to_string(boundary_size) + " nodes");
  return BoundaryProfile(cfg.tau_values);
}

}  // namespace bcm

#endif  // BCM_CONFIG_HPP
