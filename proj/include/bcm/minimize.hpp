#ifndef BCM_MINIMIZE_HPP
#define BCM_MINIMIZE_HPP

// Regularized control problem on the support-constrained subspace:
//
//   argmin_{f in S}  (f, K f) - 2 (I f, 1) + alpha ||f||^2,
//
// solved by conjugate gradients on (P K P + alpha) f = P I^+ 1 with each
// operator application costing two measurements. The volume of the domain of
// influence is read off as (f_alpha, K f_alpha) as alpha decreases.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "bcm/control.hpp"
#include "bcm/errors.hpp"
#include "bcm/fields.hpp"
#include "bcm/forward.hpp"
#include "bcm/influence.hpp"

namespace bcm {

/// Indicator of {(t, y): y in Gamma, T - min(tau(y), T) <= t <= T}.
class SupportMask {
 public:
  SupportMask(TimeGrid grid, BoundarySubset gamma, BoundaryProfile tau)
      : grid_(grid), gamma_(std::move(gamma)), tau_(std::move(tau)) {
    const std::size_t nb = gamma_.boundary_size();
    if (tau_.size() != nb) throw ShapeError("support mask: tau is not on the boundary grid");
    const double T = grid_.horizon();
    const std::size_t n = grid_.half_steps;
    mask_.assign(grid_.nodes() * nb, 0);
    first_.assign(nb, grid_.nodes());
    for (std::size_t j : gamma_.nodes()) {
      if (!std::isfinite(tau_[j])) throw DomainError("support mask: tau must be finite");
      tau_[j] = std::min(tau_[j], T);
      if (tau_[j] < 0.0) continue;  // empty slab
      const double start = (T - tau_[j]) / grid_.dt;
      auto k0 = static_cast<std::size_t>(std::max(0.0, std::ceil(start - 1e-9)));
      k0 = std::min(k0, n);
      first_[j] = k0;
      for (std::size_t k = k0; k <= n; ++k) mask_[k * nb + j] = 1;
    }
  }

  const TimeGrid& grid() const noexcept { return grid_; }
  const BoundarySubset& gamma() const noexcept { return gamma_; }
  /// tau clamped to T.
  const BoundaryProfile& tau() const noexcept { return tau_; }
  std::size_t boundary_size() const noexcept { return gamma_.boundary_size(); }
  bool operator()(std::size_t k, std::size_t j) const { return mask_[k * boundary_size() + j] != 0; }
  /// First time node of the slab at boundary node j (time-node count when empty).
  std::size_t first_node(std::size_t j) const { return first_[j]; }
  std::size_t count() const {
    return static_cast<std::size_t>(std::count(mask_.begin(), mask_.end(), static_cast<unsigned char>(1)));
  }

  SpaceTimeField apply(SpaceTimeField f) const {
    if (!(f.grid() == grid_) || f.boundary_nodes() != boundary_size())
      throw ShapeError("support mask: field is not on the mask grid");
    auto v = f.values();
    for (std::size_t i = 0; i < v.size(); ++i)
      if (!mask_[i]) v[i] = 0.0;
    return f;
  }

 private:
  TimeGrid grid_;
  BoundarySubset gamma_;
  BoundaryProfile tau_;
  std::vector<unsigned char> mask_;
  std::vector<std::size_t> first_;
};

inline SupportMask projector_P(const BoundarySubset& gamma, const BoundaryProfile& tau, const TimeGrid& grid) {
  return SupportMask(grid, gamma, tau);
}

/// P I^+ 1
inline SpaceTimeField rhs(const SupportMask& mask) {
  return mask.apply(op_I_adjoint(SpaceTimeField(mask.grid(), mask.boundary_size(), 1.0)));
}

struct CgOptions {
  double tol = 1e-8;
  int max_iters = 5000;
};

struct CgResult {
  SpaceTimeField f;
  SpaceTimeField Af;  // (P K P + alpha) f, accumulated alongside f
  int iterations = 0;
  double residual = 0.0;  // ||r|| / ||b||
  bool converged = false;
  double volume = 0.0;  // (f, K f)
  double energy = 0.0;  // (f, K f) - 2 (I f, 1) + alpha ||f||^2
  std::uint64_t measurements = 0;
};

/// (P K P + alpha) f restricted to the mask.
inline SpaceTimeField apply_normal_operator(MeasurementDevice& device, const SupportMask& mask, double alpha,
                                            const SpaceTimeField& f) {
  SpaceTimeField out = mask.apply(apply_K(device, f));
  out.axpy(alpha, f);
  return out;
}

/// Conjugate gradients in the (dt x dS_g) inner product. Throws CurvatureError
/// when a search direction has p^T A p <= 0.
inline CgResult solve_normal_equation(MeasurementDevice& device, const SupportMask& mask, double alpha,
                                      const CgOptions& opt = {}, const SpaceTimeField* initial = nullptr) {
  if (!(alpha > 0.0)) throw DomainError("solve_normal_equation: alpha must be positive");
  if (!(opt.tol > 0.0)) throw DomainError("solve_normal_equation: tol must be positive");
  const auto w = InnerProductWeights::make(device);
  const std::uint64_t count0 = device.count();
  const SpaceTimeField b = rhs(mask);
  const double bnorm = norm(b, w);

  CgResult out;
  out.f = SpaceTimeField(mask.grid(), mask.boundary_size());
  out.Af = out.f;
  if (bnorm == 0.0) {
    out.converged = true;
    return out;
  }
  SpaceTimeField r = b;
  if (initial != nullptr) {
    out.f = mask.apply(*initial);
    if (norm(out.f, w) > 0.0) {
      out.Af = apply_normal_operator(device, mask, alpha, out.f);
      r -= out.Af;
    }
  }
  SpaceTimeField p = r;
  double rr = inner(r, r, w);
  while (std::sqrt(rr) > opt.tol * bnorm && out.iterations < opt.max_iters) {
    const SpaceTimeField Ap = apply_normal_operator(device, mask, alpha, p);
    const double pAp = inner(p, Ap, w);
    if (!(pAp > 0.0)) throw CurvatureError(pAp / inner(p, p, w), out.iterations);
    const double step = rr / pAp;
    out.f.axpy(step, p);
    out.Af.axpy(step, Ap);
    r.axpy(-step, Ap);
    const double rr_next = inner(r, r, w);
    p *= rr_next / rr;
    p += r;
    rr = rr_next;
    ++out.iterations;
  }
  out.residual = std::sqrt(rr) / bnorm;
  out.converged = std::sqrt(rr) <= opt.tol * bnorm;
  const double fAf = inner(out.f, out.Af, w);
  const double ff = inner(out.f, out.f, w);
  out.volume = fAf - alpha * ff;
  out.energy = fAf - 2.0 * inner(out.f, b, w);
  out.measurements = device.count() - count0;
  return out;
}

/// (f, K f) with two fresh measurements.
inline double volume_estimate(MeasurementDevice& device, const SpaceTimeField& f) {
  const auto w = InnerProductWeights::make(device);
  if (norm(f, w) == 0.0) return 0.0;
  return inner(f, apply_K(device, f), w);
}

struct AlphaRecord {
  double alpha = 0.0;
  SpaceTimeField f;
  int cg_iters = 0;
  double residual = 0.0;
  bool converged = false;
  double energy = 0.0;
  double volume = 0.0;
  std::uint64_t measurements = 0;  // cumulative device calls after this alpha
};

struct MinimizeReport {
  std::vector<AlphaRecord> records;
  std::uint64_t measurements = 0;
  std::optional<double> oracle_volume;
  std::optional<double> interior_l2_error;
  std::optional<double> extrapolated_volume;

  double final_volume() const { return records.empty() ? 0.0 : records.back().volume; }
  const SpaceTimeField& final_minimizer() const { return records.back().f; }
  int total_cg_iterations() const {
    int n = 0;
    for (const auto& r : records) n += r.cg_iters;
    return n;
  }
  /// True when the volume estimates rise along the schedule within `slack`.
  bool volumes_nondecreasing(double slack) const {
    for (std::size_t i = 1; i < records.size(); ++i)
      if (records[i].volume < records[i - 1].volume - slack) return false;
    return true;
  }
};

/// Geometric alpha ladder from `first` down to `last` with the given ratio.
inline std::vector<double> geometric_schedule(double first = 1e-1, double last = 1e-4, double ratio = 0.1) {
  std::vector<double> out;
  for (double a = first; a >= last * (1.0 - 1e-9); a *= ratio) out.push_back(a);
  return out;
}

inline void validate_schedule(const std::vector<double>& schedule) {
  if (schedule.empty()) throw ConfigurationError("alpha schedule is empty");
  for (std::size_t i = 0; i < schedule.size(); ++i) {
    if (!(schedule[i] > 0.0)) throw ConfigurationError("alpha schedule entries must be positive");
    if (i > 0 && !(schedule[i] < schedule[i - 1])) throw ConfigurationError("alpha schedule must be strictly decreasing");
  }
}

/// Solves along a decreasing alpha schedule. With warm starts each solve
/// begins at the previous minimizer; `initial` seeds the first solve.
inline MinimizeReport alpha_continuation(MeasurementDevice& device, const SupportMask& mask,
                                         const std::vector<double>& schedule, const CgOptions& opt = {},
                                         bool warm_start = true, const SpaceTimeField* initial = nullptr) {
  validate_schedule(schedule);
  MinimizeReport report;
  const std::uint64_t count0 = device.count();
  const SpaceTimeField* start = initial;
  for (double alpha : schedule) {
    CgResult cg = solve_normal_equation(device, mask, alpha, opt, start);
    AlphaRecord rec;
    rec.alpha = alpha;
    rec.cg_iters = cg.iterations;
    rec.residual = cg.residual;
    rec.converged = cg.converged;
    rec.energy = cg.energy;
    rec.volume = cg.volume;
    rec.f = std::move(cg.f);
    rec.measurements = device.count() - count0;
    report.records.push_back(std::move(rec));
    start = warm_start ? &report.records.back().f : nullptr;
  }
  report.measurements = device.count() - count0;
  return report;
}

/// Richardson step in sqrt(alpha) over the last two records. The smoothing
/// layer at the edge of the influence domain has width ~ sqrt(alpha), so the
/// volume estimate carries a bias linear in sqrt(alpha).
inline std::optional<double> sqrt_alpha_extrapolation(const MinimizeReport& report) {
  const auto& r = report.records;
  if (r.size() < 2) return std::nullopt;
  const double s1 = std::sqrt(r[r.size() - 2].alpha), s2 = std::sqrt(r.back().alpha);
  const double v1 = r[r.size() - 2].volume, v2 = r.back().volume;
  return v2 + (v2 - v1) * s2 / (s1 - s2);
}

/// ||u - 1_A|| in L^2(dV_mu).
inline double interior_l2_distance(const SpeedField& c, const InteriorField& u, const InteriorField& indicator) {
  if (u.size() != indicator.size() || u.size() != c.grid().interior_size())
    throw ShapeError("interior_l2_distance: fields not on the interior grid");
  const auto mw = c.natural_weights();
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) s += mw[i] * (u[i] - indicator[i]) * (u[i] - indicator[i]);
  return std::sqrt(s);
}

/// ||u^{f_alpha}(T) - 1_{M(Gamma, tau ^ T)}|| via the verification channel.
inline double snapshot_indicator_error(const MeasurementDevice& device, const SpaceTimeField& f_alpha, const BoundarySubset& gamma,
                              const BoundaryProfile& tau) {
  const InteriorField u = verification_snapshot(device, f_alpha);
  const SpeedField& c = *device.speed();
  BoundaryProfile clamped = tau;
  for (double& v : clamped) v = std::min(v, device.time_grid().horizon());
  const InfluenceResult dom = domain_of_influence(c, gamma, clamped);
  return interior_l2_distance(c, u, dom.closed);
}

/// Largest eigenvalue of P K P by power iteration.
inline double estimate_K_norm(MeasurementDevice& device, const SupportMask& mask, int iterations = 20,
                              std::uint64_t seed = 7) {
  const auto w = InnerProductWeights::make(device);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  SpaceTimeField v(mask.grid(), mask.boundary_size());
  for (double& x : v.values()) x = normal(rng);
  v = mask.apply(std::move(v));
  double lambda = 0.0;
  for (int it = 0; it < iterations; ++it) {
    const double n = norm(v, w);
    if (n == 0.0) return 0.0;
    v *= 1.0 / n;
    SpaceTimeField kv = mask.apply(apply_K(device, v));
    lambda = inner(v, kv, w);
    v = std::move(kv);
  }
  return lambda;
}

/// max |(f, K h) - (K f, h)| / (||f|| ||h|| k_norm) over random masked pairs.
inline double symmetry_defect(MeasurementDevice& device, const SupportMask& mask, double k_norm, int pairs = 4,
                              std::uint64_t seed = 11) {
  const auto w = InnerProductWeights::make(device);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  auto random_field = [&] {
    SpaceTimeField v(mask.grid(), mask.boundary_size());
    for (double& x : v.values()) x = normal(rng);
    return mask.apply(std::move(v));
  };
  double worst = 0.0;
  for (int i = 0; i < pairs; ++i) {
    const SpaceTimeField f = random_field(), h = random_field();
    const double d = std::abs(inner(f, apply_K(device, h), w) - inner(apply_K(device, f), h, w));
    worst = std::max(worst, d / (norm(f, w) * norm(h, w) * k_norm));
  }
  return worst;
}

}  // namespace bcm

#endif  // BCM_MINIMIZE_HPP
