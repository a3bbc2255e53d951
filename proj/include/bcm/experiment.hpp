#ifndef BCM_EXPERIMENT_HPP
#define BCM_EXPERIMENT_HPP

// Commands behind the CLI. Each writes report.json (deterministic content)
// and timings.json (wall clock) into the output directory, plus CSV tables.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include "json.hpp"

#include "bcm/checks.hpp"
#include "bcm/config.hpp"
#include "bcm/control.hpp"
#include "bcm/forward.hpp"
#include "bcm/influence.hpp"
#include "bcm/io.hpp"
#include "bcm/minimize.hpp"
#include "bcm/reconstruct.hpp"

#ifndef BCM_VERSION
#define BCM_VERSION "0.1.0"
#endif

namespace bcm {

using Json = nlohmann::ordered_json;

enum ExitCode : int { kSuccess = 0, kCheckFailure = 1, kConfigError = 2 };

struct CommandResult {
  int exit_code = kSuccess;
  Json report;
};

namespace detail {

/// JSON numbers for finite values, strings otherwise (JSON has no inf/nan).
inline Json number(double v) {
  if (std::isfinite(v)) return v;
  return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
}

inline Json numbers(const std::vector<double>& v) {
  Json a = Json::array();
  for (double x : v) a.push_back(number(x));
  return a;
}

inline Json profile_json(const BoundaryProfile& p) { return numbers(p.vector()); }

inline Json config_json(const ExperimentConfig& cfg) {
  Json j = Json::object();
  for (const auto& [section, keys] : cfg.echo) {
    Json s = Json::object();
    for (const auto& [k, v] : keys) s[k] = v;
    j[section] = s;
  }
  // the output directory is left out so reruns elsewhere stay byte-identical
  j["cli"] = {{"verification", cfg.verification}, {"jobs", cfg.jobs}, {"seed", cfg.seed}};
  return j;
}

inline void write_json(const std::filesystem::path& path, const Json& j) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw ConfigurationError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

class Stopwatch {
 public:
  void lap(const std::string& name) {
    const auto now = std::chrono::steady_clock::now();
    laps_[name] = std::chrono::duration<double>(now - last_).count();
    last_ = now;
  }
  Json json() const {
    Json j = Json::object();
    for (const auto& [k, v] : laps_) j[k] = v;
    return j;
  }

 private:
  std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
  std::map<std::string, double> laps_;
};

inline Json header(const std::string& command, const ExperimentConfig& cfg) {
  Json j;
  j["command"] = command;
  j["version"] = BCM_VERSION;
  j["config"] = config_json(cfg);
  return j;
}

inline void finish(const ExperimentConfig& cfg, const Json& report, const Stopwatch& clock) {
  write_json(cfg.out_dir / "report.json", report);
  write_json(cfg.out_dir / "timings.json", clock.json());
}

inline void require_verification(const ExperimentConfig& cfg, const MeasurementDevice& device, const char* what) {
  if (!cfg.verification) throw ConfigurationError(std::string(what) + " needs the verification channel (--verification on)");
  if (!device.simulated()) throw ConfigurationError(std::string(what) + " needs the simulated backend");
}

inline Json minimize_json(const MinimizeReport& r) {
  Json j;
  std::vector<double> alpha, volume, residual, energy;
  Json iters = Json::array();
  for (const auto& rec : r.records) {
    alpha.push_back(rec.alpha);
    volume.push_back(rec.volume);
    residual.push_back(rec.residual);
    energy.push_back(rec.energy);
    iters.push_back(rec.cg_iters);
  }
  j["alpha"] = numbers(alpha);
  j["volume"] = numbers(volume);
  j["cg_iters"] = iters;
  j["residual"] = numbers(residual);
  j["energy"] = numbers(energy);
  j["measurements"] = r.measurements;
  if (r.oracle_volume) j["oracle_volume"] = number(*r.oracle_volume);
  if (r.interior_l2_error) j["interior_l2_error"] = number(*r.interior_l2_error);
  if (r.extrapolated_volume) j["extrapolated_volume"] = number(*r.extrapolated_volume);
  return j;
}

inline SpaceTimeField build_source(const ExperimentConfig& cfg, const MeasurementDevice& device) {
  const TimeGrid grid = device.time_grid();
  const std::size_t nb = device.boundary_size();
  if (cfg.source_kind == "zero") return SpaceTimeField(grid, nb);
  if (cfg.source_kind == "file") return io::read_trace_csv(cfg.source_file, grid, nb);
  if (cfg.pulse_node >= nb) throw ConfigurationError("[forward] pulse_node is outside the boundary grid");
  return SpaceTimeField::sample(grid, nb, [&](double t, std::size_t j) {
    return j == cfg.pulse_node && t <= cfg.pulse_duration + 1e-12 ? cfg.pulse_amplitude : 0.0;
  });
}

}  // namespace detail

inline CommandResult cmd_forward(const ExperimentConfig& cfg) {
  detail::Stopwatch clock;
  const SpeedField c = build_speed(cfg);
  MeasurementDevice device = build_device(cfg, c);
  const SpaceTimeField f = detail::build_source(cfg, device);
  clock.lap("setup");
  const SpaceTimeField trace = device.measure(f);
  clock.lap("measure");

  io::write_trace_csv(cfg.out_dir / "trace.csv", trace);
  io::write_grid_csv(cfg.out_dir / "grid.csv", c.grid());
  Json j = detail::header("forward", cfg);
  const auto& s = device.settings();
  j["solver"] = {{"dt", s.dt}, {"half_steps", s.half_steps}, {"cfl", s.cfl}, {"h", s.h}};
  double peak = 0.0;
  for (double v : trace.values()) peak = std::max(peak, std::abs(v));
  j["trace"] = {{"file", "trace.csv"}, {"max_abs", peak}, {"hash", hash_hex(trace.content_hash())}};
  if (cfg.verification && cfg.write_snapshot && device.simulated()) {
    const InteriorField u = verification_snapshot(device, f);
    io::write_interior_csv(cfg.out_dir / "snapshot.csv", c.grid(), u);
    j["snapshot"] = {{"file", "snapshot.csv"}, {"mass", natural_inner(c, u, u)}};
    clock.lap("snapshot");
  }
  j["measurements"] = device.count();
  detail::finish(cfg, j, clock);
  return {kSuccess, j};
}

inline CommandResult cmd_volume(const ExperimentConfig& cfg) {
  detail::Stopwatch clock;
  const SpeedField c = build_speed(cfg);
  MeasurementDevice device = build_device(cfg, c);
  const BoundarySubset gamma = build_gamma(cfg, device.boundary_size());
  const BoundaryProfile tau = build_tau(cfg, device.boundary_size());
  const SupportMask mask(device.time_grid(), gamma, tau);
  clock.lap("setup");

  MinimizeReport report = alpha_continuation(device, mask, cfg.alphas, cfg.cg, cfg.warm_start);
  clock.lap("continuation");
  if (cfg.extrapolate) report.extrapolated_volume = sqrt_alpha_extrapolation(report);

  Json j = detail::header("volume", cfg);
  std::optional<double> geometric;
  if (cfg.oracle != "none") {
    geometric = domain_of_influence(c, DistanceTable(c, cfg.jobs), gamma, mask.tau()).volume_closed;
    report.oracle_volume = geometric;
    clock.lap("geometric");
  }
  std::vector<double> alphas, volumes, errors;
  for (const auto& r : report.records) {
    alphas.push_back(r.alpha);
    volumes.push_back(r.volume);
  }
  if (cfg.verification && device.simulated()) {
    const InfluenceResult dom = domain_of_influence(c, gamma, mask.tau());
    for (const auto& r : report.records)
      errors.push_back(interior_l2_distance(c, verification_snapshot(device, r.f), dom.closed));
    report.interior_l2_error = errors.back();
    io::write_series_csv(cfg.out_dir / "alpha_error.csv", "alpha", "interior_l2_error", alphas, errors);
    io::write_interior_csv(cfg.out_dir / "snapshot.csv", c.grid(), verification_snapshot(device, report.final_minimizer()));
    clock.lap("verification");
  }
  io::write_series_csv(cfg.out_dir / "alpha_volume.csv", "alpha", "volume", alphas, volumes);
  io::write_trace_csv(cfg.out_dir / "minimizer.csv", report.final_minimizer());

  const double pde = report.extrapolated_volume.value_or(report.final_volume());
  j["minimize"] = detail::minimize_json(report);
  j["volume"] = {{"pde", pde}};
  if (geometric) {
    j["volume"]["geometric"] = *geometric;
    j["volume"]["gap"] = pde - *geometric;
    j["volume"]["relative_gap"] = *geometric > 0.0 ? detail::number((pde - *geometric) / *geometric) : Json(nullptr);
  }
  j["volumes_nondecreasing"] = report.volumes_nondecreasing(1e-3);
  j["measurements"] = device.count();
  detail::finish(cfg, j, clock);
  return {kSuccess, j};
}

inline CommandResult cmd_reconstruct(const ExperimentConfig& cfg) {
  detail::Stopwatch clock;
  const SpeedField c = build_speed(cfg);
  const double horizon = cfg.oracle_horizon.value_or(cfg.T);
  auto table = std::make_shared<const DistanceTable>(c, cfg.jobs);
  std::optional<MeasurementDevice> device;
  std::unique_ptr<VolumeOracle> oracle;
  if (cfg.oracle == "geometric") {
    oracle = std::make_unique<GeometricVolumeOracle>(c, table, horizon);
  } else if (cfg.oracle == "pde") {
    device.emplace(build_device(cfg, c));
    PdeOracleOptions po;
    po.schedule = cfg.alphas;
    po.cg = cfg.cg;
    po.extrapolate = cfg.pde_extrapolate;
    oracle = std::make_unique<PdeVolumeOracle>(*device, po);
  } else {
    throw ConfigurationError("reconstruct needs an oracle backend (geometric or pde)");
  }
  AscentOptions ascent = cfg.ascent;
  if (cfg.oracle_eps > 0.0) ascent.eps = cfg.oracle_eps;
  if (cfg.oracle_margin >= 0.0) ascent.margin_tol = cfg.oracle_margin;
  ascent = ascent.resolved(*oracle);
  clock.lap("setup");

  const std::size_t nb = oracle->boundary_size();
  std::vector<BoundaryProfile> seeds;
  if (cfg.seeds_kind == "fan") {
    if (nb != 2) throw ConfigurationError("[reconstruct] seeds = fan needs an interval; use constant or list");
    if (cfg.seed_count > 0) seeds = interval_seeds(*oracle, cfg.seed_count, ascent);
  } else if (cfg.seeds_kind == "constant") {
    for (double v : cfg.seed_constants) seeds.push_back(BoundaryProfile::constant(nb, v));
  } else {
    for (const auto& v : cfg.seed_lists) {
      if (v.size() != nb) throw ConfigurationError("[reconstruct] seed profile length does not match the boundary");
      seeds.emplace_back(v);
    }
  }
  if (seeds.empty()) throw ConfigurationError("[reconstruct] seed list is empty");
  for (const auto& s : seeds)
    if (!member_Qbar(*oracle, s, ascent.eps, ascent.margin_tol))
      throw ConfigurationError("[reconstruct] a seed is not in the closure of Q(M)");

  const auto elements = extract_RM(*oracle, seeds, ascent, cfg.dedupe_tol, cfg.jobs);
  clock.lap("ascent");

  std::vector<BoundaryProfile> profiles;
  Json list = Json::array();
  for (std::size_t e = 0; e < elements.size(); ++e) {
    const auto& el = elements[e];
    profiles.push_back(el.tau);
    const auto nearest = nearest_distance_function(*table, el.tau);
    const Point x = c.grid().nodes[nearest.node];
    Json item;
    item["id"] = e;
    item["tau"] = detail::profile_json(el.tau);
    item["margin"] = el.margin;
    item["cycles"] = el.cycles;
    item["converged"] = el.converged;
    if (el.certificate) {
      bool all = true;
      for (bool b : *el.certificate) all = all && b;
      item["maximality_certificate"] = all;
    }
    item["nearest_point"] = {x.x, x.y};
    item["nearest_residual"] = nearest.residual;
    list.push_back(item);
  }
  io::write_elements_csv(cfg.out_dir / "elements.csv", profiles);

  Json j = detail::header("reconstruct", cfg);
  j["oracle"] = {{"backend", oracle->backend()},
                 {"horizon", horizon},
                 {"eps", ascent.eps},
                 {"margin_tol", ascent.margin_tol},
                 {"m_infinity", oracle->m_infinity()},
                 {"evaluations", oracle->evaluations()}};
  j["seeds"] = seeds.size();
  j["elements"] = list;
  if (nb == 2 && c.grid().dim == 1) {
    const double d = travel_time_diameter_1d(elements);
    const double reference = travel_time_1d(c, 0.0, cfg.domain.length);
    j["diameter"] = {{"recovered", d}, {"reference", reference}, {"relative_error", (d - reference) / reference}};
  }
  if (device) j["measurements"] = device->count();
  detail::finish(cfg, j, clock);
  return {kSuccess, j};
}

namespace detail {

struct Check {
  std::string name;
  double value;
  double tolerance;
  bool passed;
};

inline Json checks_json(const std::vector<Check>& checks) {
  Json a = Json::array();
  for (const auto& c : checks)
    a.push_back({{"name", c.name}, {"value", number(c.value)}, {"tolerance", c.tolerance}, {"passed", c.passed}});
  return a;
}

}  // namespace detail

inline CommandResult cmd_blago_check(const ExperimentConfig& cfg) {
  detail::Stopwatch clock;
  const SpeedField c = build_speed(cfg);
  MeasurementDevice device = build_device(cfg, c);
  detail::require_verification(cfg, device, "blago-check");
  const auto samples = blagovestchenskii_pairs(device, cfg.pairs, cfg.seed);
  clock.lap("pairs");
  double worst = 0.0;
  Json list = Json::array();
  for (const auto& s : samples) {
    worst = std::max(worst, s.error);
    list.push_back({{"boundary", s.boundary}, {"interior", s.interior}, {"relative_error", s.error}});
  }
  const bool ok = worst <= cfg.tol.blagovestchenskii;
  Json j = detail::header("blago-check", cfg);
  j["pairs"] = list;
  j["max_relative_error"] = worst;
  j["tolerance"] = cfg.tol.blagovestchenskii;
  j["passed"] = ok;
  j["measurements"] = device.count();
  detail::finish(cfg, j, clock);
  return {ok ? kSuccess : kCheckFailure, j};
}

inline CommandResult cmd_verify(const ExperimentConfig& cfg) {
  detail::Stopwatch clock;
  const SpeedField c = build_speed(cfg);
  MeasurementDevice device = build_device(cfg, c);
  detail::require_verification(cfg, device, "verify");
  const BoundarySubset gamma = build_gamma(cfg, device.boundary_size());
  const BoundaryProfile tau = build_tau(cfg, device.boundary_size());
  std::vector<detail::Check> checks;
  auto add = [&](std::string name, double value, double tol) {
    checks.push_back({std::move(name), value, tol, value <= tol});
  };

  double blago = 0.0;
  for (const auto& s : blagovestchenskii_pairs(device, cfg.pairs, cfg.seed)) blago = std::max(blago, s.error);
  add("blagovestchenskii", blago, cfg.tol.blagovestchenskii);
  double cross = 0.0;
  for (const auto& s : cross_term_samples(device, cfg.pairs, cfg.seed + 1)) cross = std::max(cross, s.error);
  add("cross_term", cross, cfg.tol.cross_term);
  const AdjointDefect adj = adjoint_defect(device.time_grid(), device.boundary_weights(), 8, cfg.seed + 2);
  add("integration_adjoint", adj.relative, cfg.tol.adjoint);
  checks.push_back({"time_reversal_involution", adj.reversal_exact ? 0.0 : 1.0, 0.0, adj.reversal_exact});
  const double dilation = 2.0 * c.grid().h() / c.min();
  add("finite_speed", finite_speed_leak(device, gamma, tau, dilation, cfg.seed + 3), cfg.tol.finite_speed);
  clock.lap("identities");

  const SupportMask mask(device.time_grid(), gamma, tau);
  if (mask.count() > 0) {
    const double knorm = estimate_K_norm(device, mask, 20, cfg.seed + 4);
    add("K_symmetry", knorm > 0.0 ? symmetry_defect(device, mask, knorm, 4, cfg.seed + 5) : 0.0, cfg.tol.symmetry);
    const MinimizeReport report = alpha_continuation(device, mask, cfg.alphas, cfg.cg, cfg.warm_start);
    const double first = snapshot_indicator_error(device, report.records.front().f, gamma, tau);
    const double last = snapshot_indicator_error(device, report.records.back().f, gamma, tau);
    checks.push_back({"indicator_error_trend", last - first, 0.0, cfg.alphas.size() < 2 || last < first});
    clock.lap("minimize");
  }

  bool ok = true;
  for (const auto& ch : checks) ok = ok && ch.passed;
  Json j = detail::header("verify", cfg);
  j["checks"] = detail::checks_json(checks);
  j["passed"] = ok;
  j["measurements"] = device.count();
  detail::finish(cfg, j, clock);
  return {ok ? kSuccess : kCheckFailure, j};
}

/// Dispatch by command name.
inline CommandResult run_command(const std::string& name, const ExperimentConfig& cfg) {
  if (name == "forward") return cmd_forward(cfg);
  if (name == "volume") return cmd_volume(cfg);
  if (name == "reconstruct") return cmd_reconstruct(cfg);
  if (name == "verify") return cmd_verify(cfg);
  if (name == "blago-check") return cmd_blago_check(cfg);
  throw ConfigurationError("unknown command '" + name + "'");
}

}  // namespace bcm

#endif  // BCM_EXPERIMENT_HPP
