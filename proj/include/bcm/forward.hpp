#ifndef BCM_FORWARD_HPP
#define BCM_FORWARD_HPP

// Leapfrog solver for the weighted wave equation with a Neumann boundary source,
// and the measurement device that wraps it (or replays stored traces).
//
// Space: lumped-mass conservative differences. With M = diag(w_i c_i^-2) and
// S the Neumann stiffness (S 1 = 0),
//
//   M (u^{n+1} - 2 u^n + u^{n-1}) = dt^2 (-S u^n + B f^n),
//
// where B injects boundary sources with the dS_g weights. The scheme starts
// from rest with u^{-1} = u^1, so the source at t = 0 enters with half weight.
// Traces are u^n at the boundary nodes, t_n = n dt, n = 0..2N.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <mutex>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "bcm/errors.hpp"
#include "bcm/fields.hpp"
#include "bcm/geometry.hpp"
#include "bcm/io.hpp"

namespace bcm {

inline constexpr double kMaxCfl = 0.9;

/// Spacing that enters the CFL number: h in 1-D, (hx^-2 + hy^-2)^(-1/2) in 2-D.
inline double cfl_spacing(const Grid& g) {
  if (g.dim == 1) return g.hx;
  return 1.0 / std::sqrt(1.0 / (g.hx * g.hx) + 1.0 / (g.hy * g.hy));
}

struct SolverSettings {
  double h = 0.0;  // spacing entering the CFL number
  double dt = 0.0;
  std::size_t half_steps = 0;  // N, with N dt = T
  double cfl = 0.0;            // c_max dt / h

  double horizon() const noexcept { return dt * static_cast<double>(half_steps); }
  TimeGrid time_grid() const noexcept { return {dt, half_steps}; }

  /// Largest dt dividing T with c_max dt / h <= target_cfl.
  static SolverSettings for_speed(const SpeedField& c, double T, double target_cfl = kMaxCfl) {
    if (!(T > 0.0)) throw ConfigurationError("final time T must be positive");
    if (!(target_cfl > 0.0)) throw ConfigurationError("CFL number must be positive");
    SolverSettings s;
    s.h = cfl_spacing(c.grid());
    const double cmax = c.max();
    s.half_steps = static_cast<std::size_t>(std::ceil(T * cmax / (target_cfl * s.h) - 1e-9));
    s.half_steps = std::max<std::size_t>(s.half_steps, 1);
    s.dt = T / static_cast<double>(s.half_steps);
    s.cfl = cmax * s.dt / s.h;
    return s;
  }

  /// Explicit time step; dt must divide T.
  static SolverSettings with_dt(const SpeedField& c, double T, double dt) {
    if (!(T > 0.0) || !(dt > 0.0)) throw ConfigurationError("T and dt must be positive");
    const double n = T / dt;
    if (std::abs(n - std::round(n)) > 1e-9 * std::max(1.0, n))
      throw ConfigurationError("time step must divide T exactly");
    SolverSettings s;
    s.h = cfl_spacing(c.grid());
    s.half_steps = static_cast<std::size_t>(std::llround(n));
    s.dt = T / static_cast<double>(s.half_steps);
    s.cfl = c.max() * s.dt / s.h;
    return s;
  }

  void validate() const {
    if (!(cfl <= kMaxCfl)) throw ConfigurationError("CFL number " + std::to_string(cfl) + " exceeds 0.9");
    if (half_steps == 0 || !(dt > 0.0)) throw ConfigurationError("empty time grid");
  }
};

/// Mass, stiffness and boundary injection of the semi-discrete weighted wave operator.
class WaveOperator {
 public:
  struct Edge {
    std::size_t a;
    std::size_t b;
    double k;
  };

  explicit WaveOperator(const SpeedField& c) {
    const Grid& g = c.grid();
    if (g.spec.shape == Shape::disk)
      throw ConfigurationError("wave solver supports interval and rectangle domains only");
    mass_ = c.natural_weights();
    if (g.dim == 1) {
      for (std::size_t i = 0; i + 1 < g.interior_size(); ++i) edges_.push_back({i, i + 1, 1.0 / g.hx});
    } else {
      for (std::size_t j = 0; j < g.ny; ++j)
        for (std::size_t i = 0; i < g.nx; ++i) {
          const auto at = [&](std::size_t ii, std::size_t jj) {
            return static_cast<std::size_t>(g.node_of_lattice[g.lattice_index(ii, jj)]);
          };
          if (i + 1 < g.nx) {
            const double dual = (j == 0 || j + 1 == g.ny) ? 0.5 * g.hy : g.hy;
            edges_.push_back({at(i, j), at(i + 1, j), dual / g.hx});
          }
          if (j + 1 < g.ny) {
            const double dual = (i == 0 || i + 1 == g.nx) ? 0.5 * g.hx : g.hx;
            edges_.push_back({at(i, j), at(i, j + 1), dual / g.hy});
          }
        }
    }
    for (std::ptrdiff_t idx : g.boundary_node_index) boundary_.push_back(static_cast<std::size_t>(idx));
    load_ = c.boundary_measure_weights();
  }

  std::size_t size() const noexcept { return mass_.size(); }
  std::span<const double> mass() const noexcept { return mass_; }
  std::span<const Edge> edges() const noexcept { return edges_; }
  std::span<const std::size_t> boundary_nodes() const noexcept { return boundary_; }
  std::span<const double> boundary_load() const noexcept { return load_; }

  /// out = -S u
  void apply_negative_stiffness(std::span<const double> u, std::span<double> out) const {
    std::fill(out.begin(), out.end(), 0.0);
    for (const Edge& e : edges_) {
      const double flux = e.k * (u[e.b] - u[e.a]);
      out[e.a] += flux;
      out[e.b] -= flux;
    }
  }

  /// u^T S v
  double stiffness_form(std::span<const double> u, std::span<const double> v) const {
    double s = 0.0;
    for (const Edge& e : edges_) s += e.k * (u[e.a] - u[e.b]) * (v[e.a] - v[e.b]);
    return s;
  }

 private:
  std::vector<double> mass_;
  std::vector<Edge> edges_;
  std::vector<std::size_t> boundary_;
  std::vector<double> load_;
};

struct SimulationOptions {
  bool record_energy = false;
};

struct SimulationResult {
  SpaceTimeField trace;
  InteriorField snapshot;  // u at t = T
  std::vector<double> energy;  // E^{n+1/2}, n = 0..2N-1, when recorded
};

inline SimulationResult simulate(const WaveOperator& op, const SpaceTimeField& f, const SolverSettings& s,
                                 const SimulationOptions& opt = {}) {
  s.validate();
  const TimeGrid tg = s.time_grid();
  const std::size_t nb = op.boundary_nodes().size();
  if (!(f.grid() == tg) || f.boundary_nodes() != nb)
    throw ShapeError("simulate: source is not on the solver's time-boundary grid");

  const std::size_t n = op.size();
  const auto mass = op.mass();
  const auto bnodes = op.boundary_nodes();
  const auto load = op.boundary_load();
  const double dt2 = s.dt * s.dt;

  SimulationResult out;
  out.trace = SpaceTimeField(tg, nb);
  std::vector<double> prev(n, 0.0), cur(n, 0.0), next(n, 0.0), force(n, 0.0);

  auto accelerate = [&](std::size_t step) {  // force = M^-1 (-S cur + B f^step)
    op.apply_negative_stiffness(cur, force);
    const auto src = f.row(step);
    for (std::size_t j = 0; j < nb; ++j) force[bnodes[j]] += load[j] * src[j];
    for (std::size_t i = 0; i < n; ++i) force[i] /= mass[i];
  };
  auto record_energy = [&] {
    double kinetic = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double v = next[i] - cur[i];
      kinetic += mass[i] * v * v;
    }
    out.energy.push_back(0.5 * kinetic / dt2 + 0.5 * op.stiffness_form(next, cur));
  };

  const std::size_t steps = 2 * s.half_steps;
  for (std::size_t k = 0; k < steps; ++k) {
    // cur = u^k
    accelerate(k);
    if (k == 0) {
      for (std::size_t i = 0; i < n; ++i) next[i] = 0.5 * dt2 * force[i];
    } else {
      for (std::size_t i = 0; i < n; ++i) next[i] = 2.0 * cur[i] - prev[i] + dt2 * force[i];
    }
    if (opt.record_energy) record_energy();
    if (k % 64 == 63 || k + 1 == steps) {
      double probe = 0.0;
      for (double v : next) probe += std::abs(v);
      if (!std::isfinite(probe)) throw InstabilityError(k + 1, "wave solver produced non-finite values");
    }
    std::swap(prev, cur);
    std::swap(cur, next);
    // cur = u^{k+1}
    auto row = out.trace.row(k + 1);
    for (std::size_t j = 0; j < nb; ++j) row[j] = cur[bnodes[j]];
    if (k + 1 == s.half_steps) out.snapshot = InteriorField(cur);
  }
  return out;
}

inline SimulationResult simulate(const SpeedField& c, const SpaceTimeField& f, const SolverSettings& s,
                                 const SimulationOptions& opt = {}) {
  return simulate(WaveOperator(c), f, s, opt);
}

/// Independent Gaussian noise per sample, scaled by the trace RMS.
struct NoiseModel {
  double level = 0.0;
  std::uint64_t seed = 0;
};

inline std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

/// The measurement map f -> trace, as a black box with call accounting.
class MeasurementDevice {
 public:
  /// Simulated backend.
  MeasurementDevice(SpeedField c, SolverSettings settings, NoiseModel noise = {})
      : speed_(std::move(c)), settings_(settings), noise_(noise) {
    settings_.validate();
    op_.emplace(*speed_);
    grid_ = settings_.time_grid();
    boundary_weights_ = speed_->boundary_measure_weights();
  }

  /// Replay backend: traces stored as <dir>/<source hash>.csv. The boundary
  /// weights are the dS_g weights, known because c is known on the boundary.
  static MeasurementDevice replay(std::filesystem::path dir, TimeGrid grid, std::vector<double> boundary_weights,
                                  NoiseModel noise = {}) {
    return MeasurementDevice(std::move(dir), grid, std::move(boundary_weights), noise);
  }

  MeasurementDevice(const MeasurementDevice&) = delete;
  MeasurementDevice& operator=(const MeasurementDevice&) = delete;
  MeasurementDevice(MeasurementDevice&& o) noexcept
      : speed_(std::move(o.speed_)),
        settings_(o.settings_),
        op_(std::move(o.op_)),
        replay_dir_(std::move(o.replay_dir_)),
        record_dir_(std::move(o.record_dir_)),
        grid_(o.grid_),
        boundary_weights_(std::move(o.boundary_weights_)),
        noise_(o.noise_),
        count_(o.count_.load()) {}

  SpaceTimeField measure(const SpaceTimeField& f) {
    if (!(f.grid() == grid_) || f.boundary_nodes() != boundary_weights_.size())
      throw ShapeError("measure: source is not on the device's time-boundary grid");
    const std::uint64_t call = count_.fetch_add(1);
    SpaceTimeField trace;
    if (replay_dir_) {
      const auto path = *replay_dir_ / (hash_hex(f.content_hash()) + ".csv");
      if (!std::filesystem::exists(path)) throw ReplayError("no stored trace for source " + path.filename().string());
      trace = io::read_trace_csv(path, grid_, boundary_weights_.size());
    } else {
      trace = simulate(*op_, f, settings_).trace;
      if (record_dir_) {
        std::lock_guard lock(record_mutex_);
        io::write_trace_csv(*record_dir_ / (hash_hex(f.content_hash()) + ".csv"), trace);
      }
    }
    if (noise_.level > 0.0) add_noise(trace, call);
    return trace;
  }

  /// Simulated backend only: also write every clean trace into `dir` for later replay.
  void record_to(std::filesystem::path dir) {
    std::filesystem::create_directories(dir);
    record_dir_ = std::move(dir);
  }

  std::uint64_t count() const noexcept { return count_.load(); }
  const TimeGrid& time_grid() const noexcept { return grid_; }
  std::size_t boundary_size() const noexcept { return boundary_weights_.size(); }
  std::span<const double> boundary_weights() const noexcept { return boundary_weights_; }
  const NoiseModel& noise() const noexcept { return noise_; }
  bool simulated() const noexcept { return op_.has_value(); }
  const SpeedField* speed() const noexcept { return speed_ ? &*speed_ : nullptr; }
  const SolverSettings& settings() const noexcept { return settings_; }

 private:
  MeasurementDevice(std::filesystem::path dir, TimeGrid grid, std::vector<double> boundary_weights, NoiseModel noise)
      : replay_dir_(std::move(dir)), grid_(grid), boundary_weights_(std::move(boundary_weights)), noise_(noise) {
    if (!std::filesystem::is_directory(*replay_dir_))
      throw ConfigurationError("replay directory does not exist: " + replay_dir_->string());
    settings_.dt = grid.dt;
    settings_.half_steps = grid.half_steps;
  }

  void add_noise(SpaceTimeField& trace, std::uint64_t call) const {
    double ss = 0.0;
    for (double v : trace.values()) ss += v * v;
    const double rms = std::sqrt(ss / static_cast<double>(std::max<std::size_t>(trace.size(), 1)));
    if (rms == 0.0) return;
    std::uint64_t z = noise_.seed + 0x9e3779b97f4a7c15ull * (call + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    std::mt19937_64 rng(z ^ (z >> 31));
    std::normal_distribution<double> normal(0.0, noise_.level * rms);
    for (double& v : trace.values()) v += normal(rng);
  }

  std::optional<SpeedField> speed_;
  SolverSettings settings_;
  std::optional<WaveOperator> op_;
  std::optional<std::filesystem::path> replay_dir_;
  std::optional<std::filesystem::path> record_dir_;
  TimeGrid grid_;
  std::vector<double> boundary_weights_;
  NoiseModel noise_;
  std::atomic<std::uint64_t> count_{0};
  std::mutex record_mutex_;
};

/// Verification channel: the interior field u^f(T). Not a measurement; it is
/// never used on the solve path and does not touch the device counter.
inline InteriorField verification_snapshot(const MeasurementDevice& device, const SpaceTimeField& f) {
  if (!device.simulated()) throw ConfigurationError("verification snapshots need the simulated backend");
  return simulate(*device.speed(), f, device.settings()).snapshot;
}

}  // namespace bcm

#endif  // BCM_FORWARD_HPP
