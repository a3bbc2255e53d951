#ifndef BCM_CHECKS_HPP
#define BCM_CHECKS_HPP

// Cross-module consistency checks shared by the verify command and the test
// suites. All of them need the simulated backend (verification snapshots).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "bcm/control.hpp"
#include "bcm/errors.hpp"
#include "bcm/fields.hpp"
#include "bcm/forward.hpp"
#include "bcm/influence.hpp"
#include "bcm/minimize.hpp"

namespace bcm {

/// sum_k a_kj sin(k pi t / (2T)), a_kj ~ N(0, 1) / k, k = 1..modes.
inline SpaceTimeField band_limited_source(const TimeGrid& grid, std::size_t boundary_nodes, std::mt19937_64& rng,
                                          int modes = 6) {
  std::normal_distribution<double> normal;
  std::vector<double> a(static_cast<std::size_t>(modes) * boundary_nodes);
  for (std::size_t k = 0; k < static_cast<std::size_t>(modes); ++k)
    for (std::size_t j = 0; j < boundary_nodes; ++j) a[k * boundary_nodes + j] = normal(rng) / static_cast<double>(k + 1);
  const double T = grid.horizon();
  return SpaceTimeField::sample(grid, boundary_nodes, [&](double t, std::size_t j) {
    double v = 0.0;
    for (std::size_t k = 0; k < static_cast<std::size_t>(modes); ++k)
      v += a[k * boundary_nodes + j] * std::sin(static_cast<double>(k + 1) * M_PI * t / (2.0 * T));
    return v;
  });
}

/// (u, v) in L^2(dV_mu).
inline double natural_inner(const SpeedField& c, const InteriorField& u, const InteriorField& v) {
  const auto mw = c.natural_weights();
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) s += mw[i] * u[i] * v[i];
  return s;
}

struct BlagoSample {
  double boundary = 0.0;  // (f, K h)
  double interior = 0.0;  // (u^f(T), u^h(T))
  double error = 0.0;     // |difference| / (||u^f(T)|| ||u^h(T)||)
};

/// Compares (f, K h) with the interior product for random band-limited pairs.
inline std::vector<BlagoSample> blagovestchenskii_pairs(MeasurementDevice& device, int pairs, std::uint64_t seed) {
  const auto w = InnerProductWeights::make(device);
  const SpeedField& c = *device.speed();
  std::mt19937_64 rng(seed);
  std::vector<BlagoSample> out;
  for (int p = 0; p < pairs; ++p) {
    const SpaceTimeField f = band_limited_source(device.time_grid(), device.boundary_size(), rng);
    const SpaceTimeField h = band_limited_source(device.time_grid(), device.boundary_size(), rng);
    BlagoSample s;
    s.boundary = inner(f, apply_K(device, h), w);
    const InteriorField uf = verification_snapshot(device, f), uh = verification_snapshot(device, h);
    s.interior = natural_inner(c, uf, uh);
    s.error = std::abs(s.boundary - s.interior) / std::sqrt(natural_inner(c, uf, uf) * natural_inner(c, uh, uh));
    out.push_back(s);
  }
  return out;
}

struct CrossTermSample {
  double boundary = 0.0;  // (I f, 1)
  double interior = 0.0;  // (u^f(T), 1)
  double error = 0.0;     // |difference| / (||u^f(T)|| ||1||)
};

/// (I f, 1) against (u^f(T), 1)_{dV_mu}; needs no measurement.
inline std::vector<CrossTermSample> cross_term_samples(const MeasurementDevice& device, int count, std::uint64_t seed) {
  const auto w = InnerProductWeights::make(device);
  const SpeedField& c = *device.speed();
  const InteriorField one(c.grid().interior_size(), 1.0);
  std::mt19937_64 rng(seed);
  std::vector<CrossTermSample> out;
  for (int p = 0; p < count; ++p) {
    const SpaceTimeField f = band_limited_source(device.time_grid(), device.boundary_size(), rng);
    CrossTermSample s;
    s.boundary = inner(op_I(f), ones_like(f), w);
    const InteriorField u = verification_snapshot(device, f);
    s.interior = natural_inner(c, u, one);
    s.error = std::abs(s.boundary - s.interior) / std::sqrt(natural_inner(c, u, u) * natural_inner(c, one, one));
    out.push_back(s);
  }
  return out;
}

struct AdjointDefect {
  double relative = 0.0;  // max |(If, h) - (f, I+h)| / (||If|| ||h|| + ||f|| ||I+h||)
  bool reversal_exact = true;  // R(R f) == f bit for bit
};

inline AdjointDefect adjoint_defect(const TimeGrid& grid, std::span<const double> boundary_weights, int trials,
                                    std::uint64_t seed) {
  const auto w = InnerProductWeights::make(grid, boundary_weights);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  auto random_field = [&] {
    SpaceTimeField v(grid, boundary_weights.size());
    for (double& x : v.values()) x = normal(rng);
    return v;
  };
  AdjointDefect out;
  for (int i = 0; i < trials; ++i) {
    const SpaceTimeField f = random_field(), h = random_field();
    const SpaceTimeField If = op_I(f), Ith = op_I_adjoint(h);
    const double d = std::abs(inner(If, h, w) - inner(f, Ith, w));
    const double scale = norm(If, w) * norm(h, w) + norm(f, w) * norm(Ith, w);
    out.relative = std::max(out.relative, scale > 0.0 ? d / scale : d);
    out.reversal_exact = out.reversal_exact && op_R(op_R(f)) == f;
  }
  return out;
}

/// Smooth bump on (0, 1): exp(-1 / (s (1 - s))).
inline double smooth_bump(double s) { return (s <= 0.0 || s >= 1.0) ? 0.0 : std::exp(-1.0 / (s * (1.0 - s))); }

/// Source supported in {t >= T - tau(y)} on gamma with a smooth onset.
inline SpaceTimeField slab_source(const TimeGrid& grid, const BoundarySubset& gamma, const BoundaryProfile& tau,
                                  std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * M_PI);
  std::vector<double> ph(tau.size());
  for (double& p : ph) p = phase(rng);
  const double T = grid.horizon();
  return SpaceTimeField::sample(grid, tau.size(), [&](double t, std::size_t j) {
    const double width = std::min(tau[j], T);
    if (!gamma.contains(j) || !(width > 0.0) || t > T) return 0.0;
    return smooth_bump((t - (T - width)) / width) * std::cos(7.0 * t + ph[j]);
  });
}

/// Share of snapshot mass (u^2 dV_mu) farther than `dilation` travel time
/// from M(gamma, tau).
inline double finite_speed_leak(const MeasurementDevice& device, const BoundarySubset& gamma,
                                const BoundaryProfile& tau, double dilation, std::uint64_t seed) {
  const SpeedField& c = *device.speed();
  const SpaceTimeField f = slab_source(device.time_grid(), gamma, tau, seed);
  const InteriorField u = verification_snapshot(device, f);
  BoundaryProfile clamped = tau;
  for (double& v : clamped) v = std::min(v, device.time_grid().horizon());
  const InteriorField r = r_gamma_tau(c, gamma, clamped);
  const auto mw = c.natural_weights();
  double inside = 0.0, outside = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) (r[i] <= dilation ? inside : outside) += mw[i] * u[i] * u[i];
  const double total = inside + outside;
  return total > 0.0 ? outside / total : 0.0;
}

}  // namespace bcm

#endif  // BCM_CHECKS_HPP
