#ifndef BCM_RECONSTRUCT_HPP
#define BCM_RECONSTRUCT_HPP

// Lattice inversion: membership in the closure of Q(M) = {tau : m_tau < m_inf},
// coordinate ascent to maximal elements, and extraction of boundary distance
// functions. Works with any volume oracle.

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <memory>
#include <mutex>
#include <numeric>
#include <optional>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "bcm/errors.hpp"
#include "bcm/fields.hpp"
#include "bcm/geometry.hpp"
#include "bcm/influence.hpp"
#include "bcm/minimize.hpp"

namespace bcm {

/// tau -> m_tau with a cache. Subclasses supply evaluate(); evaluations for
/// distinct tau may run concurrently.
class VolumeOracle {
 public:
  virtual ~VolumeOracle() = default;

  double operator()(const BoundaryProfile& tau) const {
    if (tau.size() != boundary_size()) throw ShapeError("volume oracle: profile not on the boundary grid");
    const std::string key = cache_key(tau);
    {
      std::lock_guard lock(mutex_);
      if (auto it = cache_.find(key); it != cache_.end()) {
        ++hits_;
        return it->second;
      }
    }
    const double v = evaluate(tau);
    std::lock_guard lock(mutex_);
    ++evaluations_;
    return cache_.emplace(key, v).first->second;  // first insertion wins
  }

  /// Volume of tau == T.
  double m_infinity() const { return (*this)(BoundaryProfile::constant(boundary_size(), horizon())); }

  virtual std::size_t boundary_size() const = 0;
  virtual double horizon() const = 0;
  virtual const char* backend() const = 0;
  /// Suggested retraction eps and margin from the oracle's resolution.
  virtual double default_eps() const = 0;
  virtual double default_margin() const = 0;

  std::size_t evaluations() const {
    std::lock_guard lock(mutex_);
    return evaluations_;
  }
  std::size_t cache_hits() const {
    std::lock_guard lock(mutex_);
    return hits_;
  }

 protected:
  virtual double evaluate(const BoundaryProfile& tau) const = 0;

 private:
  static std::string cache_key(const BoundaryProfile& tau) {
    std::string key(tau.size() * sizeof(double), '\0');
    std::memcpy(key.data(), tau.values().data(), key.size());
    return key;
  }

  mutable std::mutex mutex_;
  mutable std::unordered_map<std::string, double> cache_;
  mutable std::size_t evaluations_ = 0;
  mutable std::size_t hits_ = 0;
};

/// Volumes from travel-time distances.
class GeometricVolumeOracle : public VolumeOracle {
 public:
  GeometricVolumeOracle(SpeedField c, double horizon, unsigned jobs = 1)
      : c_(std::move(c)), table_(std::make_shared<DistanceTable>(c_, jobs)), horizon_(horizon) {
    if (!(horizon > 0.0)) throw DomainError("geometric oracle: horizon must be positive");
  }
  GeometricVolumeOracle(SpeedField c, std::shared_ptr<const DistanceTable> table, double horizon)
      : c_(std::move(c)), table_(std::move(table)), horizon_(horizon) {
    if (!(horizon > 0.0)) throw DomainError("geometric oracle: horizon must be positive");
  }

  std::size_t boundary_size() const override { return table_->boundary_size(); }
  double horizon() const override { return horizon_; }
  const char* backend() const override { return "geometric"; }
  double default_eps() const override { return 0.5 * c_.grid().h() / c_.min(); }
  double default_margin() const override {
    const auto w = c_.natural_weights();
    return 0.25 * *std::min_element(w.begin(), w.end());
  }
  const DistanceTable& table() const noexcept { return *table_; }
  const SpeedField& speed() const noexcept { return c_; }

 protected:
  double evaluate(const BoundaryProfile& tau) const override {
    const auto gamma = BoundarySubset::all(boundary_size());
    return domain_of_influence(c_, *table_, gamma, tau).volume_closed;
  }

 private:
  SpeedField c_;
  std::shared_ptr<const DistanceTable> table_;
  double horizon_;
};

struct PdeOracleOptions {
  std::vector<double> schedule = geometric_schedule();
  CgOptions cg{};
  bool extrapolate = false;
  double eps = 0.0;     // 0: derived from the time step
  double margin = 0.0;  // 0: derived from the grid
};

/// Volumes from boundary measurements via alpha-continuation. Keeps the last
/// per-alpha minimizers as warm starts for the next query.
class PdeVolumeOracle : public VolumeOracle {
 public:
  PdeVolumeOracle(MeasurementDevice& device, PdeOracleOptions opt = {}) : device_(device), opt_(std::move(opt)) {
    validate_schedule(opt_.schedule);
  }

  std::size_t boundary_size() const override { return device_.boundary_size(); }
  double horizon() const override { return device_.time_grid().horizon(); }
  const char* backend() const override { return "pde"; }
  double default_eps() const override {
    return opt_.eps > 0.0 ? opt_.eps : 2.0 * device_.time_grid().dt;
  }
  double default_margin() const override {
    if (opt_.margin > 0.0) return opt_.margin;
    return 3.0 * std::sqrt(opt_.schedule.back()) * static_cast<double>(device_.boundary_size()) / 2.0;
  }
  std::uint64_t measurements() const { return device_.count(); }

 protected:
  double evaluate(const BoundaryProfile& tau) const override {
    const auto gamma = BoundarySubset::all(boundary_size());
    const SupportMask mask(device_.time_grid(), gamma, tau);
    std::vector<SpaceTimeField> warm;
    {
      std::lock_guard lock(warm_mutex_);
      warm = warm_;
    }
    MinimizeReport report;
    const std::uint64_t count0 = device_.count();
    for (std::size_t i = 0; i < opt_.schedule.size(); ++i) {
      const SpaceTimeField* start = nullptr;
      if (i < warm.size()) start = &warm[i];
      else if (!report.records.empty()) start = &report.records.back().f;
      CgResult cg = solve_normal_equation(device_, mask, opt_.schedule[i], opt_.cg, start);
      AlphaRecord rec;
      rec.alpha = opt_.schedule[i];
      rec.cg_iters = cg.iterations;
      rec.residual = cg.residual;
      rec.converged = cg.converged;
      rec.energy = cg.energy;
      rec.volume = cg.volume;
      rec.f = std::move(cg.f);
      rec.measurements = device_.count() - count0;
      report.records.push_back(std::move(rec));
    }
    {
      std::lock_guard lock(warm_mutex_);
      warm_.clear();
      for (const auto& r : report.records) warm_.push_back(r.f);
    }
    if (opt_.extrapolate) return *sqrt_alpha_extrapolation(report);
    return report.final_volume();
  }

 private:
  MeasurementDevice& device_;
  PdeOracleOptions opt_;
  mutable std::mutex warm_mutex_;
  mutable std::vector<SpaceTimeField> warm_;
};

/// tau in the closure of Q(M): m_{max(tau - eps, 0)} < m_inf - margin_tol.
inline bool member_Qbar(const VolumeOracle& oracle, const BoundaryProfile& tau, double eps, double margin_tol) {
  if (!(eps > 0.0)) throw DomainError("member_Qbar: eps must be positive");
  BoundaryProfile retracted = tau;
  for (double& v : retracted) v = std::max(v - eps, 0.0);
  return oracle(retracted) < oracle.m_infinity() - margin_tol;
}

struct SemilatticeElement {
  BoundaryProfile tau;
  double margin = 0.0;                  // m_inf - m_{tau - eps}
  std::vector<double> headroom;         // final bisection bracket per node
  std::optional<std::vector<bool>> certificate;  // bump by 3 step_tol leaves Q-bar, per node
  int cycles = 0;
  bool converged = false;
};

struct AscentOptions {
  double eps = 0.0;         // 0: oracle default
  double margin_tol = -1.0;  // < 0: oracle default
  double step_tol = 1e-3;
  int bisection_steps = 12;
  int max_cycles = 50;
  std::vector<std::size_t> order;  // empty: nodes by increasing tau0, ties by index
  bool certify = true;

  AscentOptions resolved(const VolumeOracle& oracle) const {
    AscentOptions o = *this;
    if (!(o.eps > 0.0)) o.eps = oracle.default_eps();
    if (o.margin_tol < 0.0) o.margin_tol = oracle.default_margin();
    if (!(o.step_tol > 0.0)) throw ConfigurationError("step_tol must be positive");
    if (o.bisection_steps < 1) throw ConfigurationError("bisection_steps must be at least 1");
    return o;
  }
};

struct RayLimit {
  double value = 0.0;    // largest member value found
  double bracket = 0.0;  // width of the final bisection bracket
};

/// Largest value of tau[node] in [tau[node], horizon] keeping tau in Q-bar,
/// assuming membership is monotone along the ray. `opt` must be resolved.
inline RayLimit ray_limit(const VolumeOracle& oracle, const BoundaryProfile& tau, std::size_t node,
                          const AscentOptions& opt) {
  double lo = tau[node];
  double hi = std::max(oracle.horizon(), lo);
  BoundaryProfile probe = tau;
  probe[node] = hi;
  if (member_Qbar(oracle, probe, opt.eps, opt.margin_tol)) return {hi, 0.0};
  for (int s = 0; s < 64 && (s < opt.bisection_steps || hi - lo > 0.5 * opt.step_tol); ++s) {
    const double mid = 0.5 * (lo + hi);
    probe[node] = mid;
    (member_Qbar(oracle, probe, opt.eps, opt.margin_tol) ? lo : hi) = mid;
  }
  return {lo, hi - lo};
}

/// Cyclic coordinate ascent: per node, bisect for the largest value that
/// keeps membership, until no node moves more than step_tol.
inline SemilatticeElement ascend_to_maximal(const VolumeOracle& oracle, const BoundaryProfile& tau0,
                                            const AscentOptions& options = {}) {
  const AscentOptions opt = options.resolved(oracle);
  const std::size_t nb = oracle.boundary_size();
  if (tau0.size() != nb) throw ShapeError("ascend_to_maximal: profile not on the boundary grid");
  auto member = [&](const BoundaryProfile& t) { return member_Qbar(oracle, t, opt.eps, opt.margin_tol); };
  if (!member(tau0)) throw PreconditionError("ascend_to_maximal: initial profile is not in the closure of Q(M)");

  std::vector<std::size_t> order = opt.order;
  if (order.empty()) {
    order.resize(nb);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return tau0[a] < tau0[b]; });
  }
  for (std::size_t j : order)
    if (j >= nb) throw ConfigurationError("ascent order names a node outside the boundary grid");

  SemilatticeElement out;
  out.tau = tau0;
  out.headroom.assign(nb, 0.0);
  for (out.cycles = 1; out.cycles <= opt.max_cycles; ++out.cycles) {
    double largest_move = 0.0;
    for (std::size_t j : order) {
      if (!member(out.tau))
        throw OracleInconsistency("membership lost at the start of the ray for boundary node " + std::to_string(j));
      const RayLimit lim = ray_limit(oracle, out.tau, j, opt);
      out.headroom[j] = lim.bracket;
      largest_move = std::max(largest_move, lim.value - out.tau[j]);
      out.tau[j] = lim.value;
    }
    if (largest_move <= opt.step_tol) {
      out.converged = true;
      break;
    }
  }
  out.cycles = std::min(out.cycles, opt.max_cycles);
  BoundaryProfile retracted = out.tau;
  for (double& v : retracted) v = std::max(v - opt.eps, 0.0);
  out.margin = oracle.m_infinity() - oracle(retracted);
  if (opt.certify && out.converged) {
    std::vector<bool> cert(nb);
    for (std::size_t j = 0; j < nb; ++j) {
      BoundaryProfile bumped = out.tau;
      bumped[j] += 3.0 * opt.step_tol;
      cert[j] = !member(bumped);
    }
    out.certificate = std::move(cert);
  }
  return out;
}

/// Seeds (k s / (n + 1), 0) for k = 1..n on an interval, where s is the ray
/// limit of node 0 from tau == 0. Uses only the oracle.
inline std::vector<BoundaryProfile> interval_seeds(const VolumeOracle& oracle, std::size_t n, const AscentOptions& options) {
  if (oracle.boundary_size() != 2) throw ShapeError("interval_seeds: expects an interval boundary");
  const AscentOptions opt = options.resolved(oracle);
  const double span = ray_limit(oracle, BoundaryProfile{0.0, 0.0}, 0, opt).value;
  std::vector<BoundaryProfile> seeds;
  for (std::size_t k = 1; k <= n; ++k) seeds.push_back({span * static_cast<double>(k) / static_cast<double>(n + 1), 0.0});
  return seeds;
}

/// Ascends every seed and drops results within dedupe_tol (sup norm) of an
/// earlier one. Seeds are processed on `jobs` threads; output order follows
/// the seeds.
inline std::vector<SemilatticeElement> extract_RM(const VolumeOracle& oracle, const std::vector<BoundaryProfile>& seeds,
                                                  const AscentOptions& opt, double dedupe_tol, unsigned jobs = 1) {
  std::vector<std::optional<SemilatticeElement>> raw(seeds.size());
  std::vector<std::exception_ptr> errors(seeds.size());
  auto work = [&](std::size_t first, std::size_t stride) {
    for (std::size_t s = first; s < seeds.size(); s += stride) {
      try {
        raw[s] = ascend_to_maximal(oracle, seeds[s], opt);
      } catch (...) {
        errors[s] = std::current_exception();
      }
    }
  };
  jobs = std::max(1u, jobs);
  if (jobs == 1) {
    work(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < jobs; ++t) pool.emplace_back(work, t, jobs);
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  std::vector<SemilatticeElement> out;
  for (auto& r : raw) {
    const bool duplicate = std::any_of(out.begin(), out.end(),
                                       [&](const SemilatticeElement& e) { return sup_distance(e.tau, r->tau) <= dedupe_tol; });
    if (!duplicate) out.push_back(std::move(*r));
  }
  return out;
}

/// Median of r(0) + r(1) over recovered 1-D elements.
inline double travel_time_diameter_1d(const std::vector<SemilatticeElement>& elements) {
  if (elements.empty()) throw DomainError("travel_time_diameter_1d: no elements");
  std::vector<double> sums;
  for (const auto& e : elements) {
    if (e.tau.size() != 2) throw ShapeError("travel_time_diameter_1d: expects interval profiles");
    sums.push_back(e.tau[0] + e.tau[1]);
  }
  std::sort(sums.begin(), sums.end());
  const std::size_t n = sums.size();
  return n % 2 == 1 ? sums[n / 2] : 0.5 * (sums[n / 2 - 1] + sums[n / 2]);
}

struct NearestDistanceFunction {
  std::size_t node = 0;
  double residual = std::numeric_limits<double>::infinity();
};

/// The grid point x minimising ||tau - r_x||_inf.
inline NearestDistanceFunction nearest_distance_function(const DistanceTable& table, const BoundaryProfile& tau) {
  if (tau.size() != table.boundary_size()) throw ShapeError("nearest_distance_function: profile not on the boundary grid");
  NearestDistanceFunction best;
  const std::size_t n = table.grid().interior_size();
  for (std::size_t i = 0; i < n; ++i) {
    double worst = 0.0;
    for (std::size_t j = 0; j < tau.size() && worst < best.residual; ++j)
      worst = std::max(worst, std::abs(tau[j] - table(j, i)));
    if (worst < best.residual) best = {i, worst};
  }
  return best;
}

}  // namespace bcm

#endif  // BCM_RECONSTRUCT_HPP
