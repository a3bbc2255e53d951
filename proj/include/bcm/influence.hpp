#ifndef BCM_INFLUENCE_HPP
#define BCM_INFLUENCE_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "bcm/errors.hpp"
#include "bcm/fields.hpp"
#include "bcm/geometry.hpp"

namespace bcm {

/// Selected boundary nodes (the set Gamma).
class BoundarySubset {
 public:
  static BoundarySubset all(std::size_t boundary_size) {
    BoundarySubset s;
    s.size_ = boundary_size;
    s.whole_ = true;
    for (std::size_t j = 0; j < boundary_size; ++j) s.nodes_.push_back(j);
    s.validate();
    return s;
  }

  static BoundarySubset of(std::vector<std::size_t> nodes, std::size_t boundary_size) {
    std::sort(nodes.begin(), nodes.end());
    nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
    BoundarySubset s;
    s.size_ = boundary_size;
    s.nodes_ = std::move(nodes);
    s.whole_ = s.nodes_.size() == boundary_size;
    s.validate();
    return s;
  }

  const std::vector<std::size_t>& nodes() const noexcept { return nodes_; }
  bool whole_boundary() const noexcept { return whole_; }
  std::size_t boundary_size() const noexcept { return size_; }
  bool contains(std::size_t j) const { return std::binary_search(nodes_.begin(), nodes_.end(), j); }

 private:
  void validate() const {
    if (nodes_.empty()) throw ConfigurationError("boundary subset is empty");
    if (nodes_.back() >= size_) throw ConfigurationError("boundary subset contains a node outside the boundary grid");
  }

  std::vector<std::size_t> nodes_;
  std::size_t size_ = 0;
  bool whole_ = false;
};

struct InfluenceResult {
  InteriorField closed;  // 1 where r <= 0
  InteriorField open;    // 1 where r < 0
  InteriorField r;       // r_{Gamma,tau}
  double volume_closed = 0.0;
  double volume_open = 0.0;
};

/// r(x) = min over y in Gamma of d(x, y) - tau(y).
inline InteriorField r_gamma_tau(const DistanceTable& table, const BoundarySubset& gamma, const BoundaryProfile& tau) {
  if (tau.size() != table.boundary_size() || gamma.boundary_size() != table.boundary_size())
    throw ShapeError("r_gamma_tau: profile or subset not on the boundary grid");
  const std::size_t n = table.grid().interior_size();
  InteriorField r(n, std::numeric_limits<double>::infinity());
  for (std::size_t j : gamma.nodes()) {
    if (!std::isfinite(tau[j])) throw DomainError("r_gamma_tau: tau must be finite on gamma");
    const InteriorField& d = table.from_boundary(j);
    for (std::size_t i = 0; i < n; ++i) r[i] = std::min(r[i], d[i] - tau[j]);
  }
  return r;
}

inline InteriorField r_gamma_tau(const SpeedField& c, const BoundarySubset& gamma, const BoundaryProfile& tau) {
  return r_gamma_tau(DistanceTable(c), gamma, tau);
}

inline InfluenceResult influence_from_r(const SpeedField& c, InteriorField r) {
  InfluenceResult out;
  out.closed = InteriorField(r.size());
  out.open = InteriorField(r.size());
  for (std::size_t i = 0; i < r.size(); ++i) {
    out.closed[i] = r[i] <= 0.0 ? 1.0 : 0.0;
    out.open[i] = r[i] < 0.0 ? 1.0 : 0.0;
  }
  out.volume_closed = natural_volume(c, out.closed);
  out.volume_open = natural_volume(c, out.open);
  out.r = std::move(r);
  return out;
}

/// Nodes of gamma with tau <= 0 reach only themselves, a null set, and are
/// dropped; otherwise they would add their own quadrature weight.
inline InfluenceResult domain_of_influence(const SpeedField& c, const DistanceTable& table, const BoundarySubset& gamma,
                                           const BoundaryProfile& tau) {
  if (tau.size() != gamma.boundary_size()) throw ShapeError("domain_of_influence: profile not on the boundary grid");
  std::vector<std::size_t> reaching;
  for (std::size_t j : gamma.nodes())
    if (tau[j] > 0.0) reaching.push_back(j);
  if (reaching.empty()) {
    InfluenceResult out = influence_from_r(c, InteriorField(c.grid().interior_size(), 1.0));
    out.r = r_gamma_tau(table, gamma, tau);
    return out;
  }
  return influence_from_r(c, r_gamma_tau(table, BoundarySubset::of(std::move(reaching), gamma.boundary_size()), tau));
}

inline InfluenceResult domain_of_influence(const SpeedField& c, const BoundarySubset& gamma, const BoundaryProfile& tau) {
  return domain_of_influence(c, DistanceTable(c), gamma, tau);
}

/// Natural volume of the shell {|r| <= width}; bounds the closed/open gap.
inline double shell_volume(const SpeedField& c, const InteriorField& r, double width) {
  InteriorField shell(r.size());
  for (std::size_t i = 0; i < r.size(); ++i) shell[i] = std::abs(r[i]) <= width ? 1.0 : 0.0;
  return natural_volume(c, shell);
}

/// Piecewise-constant tau_eps with tau - eps < tau_eps < tau on gamma.
/// Levels are spaced eps/2 from min(tau) - eps/2; each node takes the largest
/// level strictly below tau. Nodes outside gamma keep their value.
inline BoundaryProfile simple_approximation(const BoundaryProfile& tau, const BoundarySubset& gamma, double eps) {
  if (!(eps > 0.0)) throw DomainError("simple_approximation: eps must be positive");
  if (tau.size() != gamma.boundary_size()) throw ShapeError("simple_approximation: profile not on the boundary grid");
  double lo = std::numeric_limits<double>::infinity();
  for (std::size_t j : gamma.nodes()) lo = std::min(lo, tau[j]);
  const double base = lo - 0.5 * eps;
  const double step = 0.5 * eps;
  BoundaryProfile out = tau;
  for (std::size_t j : gamma.nodes()) {
    double x = (tau[j] - base) / step;
    if (std::abs(x - std::round(x)) < 1e-9) x = std::round(x);
    auto k = static_cast<long long>(std::ceil(x)) - 1;
    double level = base + static_cast<double>(k) * step;
    while (level >= tau[j]) level = base + static_cast<double>(--k) * step;
    out[j] = level;
  }
  return out;
}

}  // namespace bcm

#endif  // BCM_INFLUENCE_HPP
