#ifndef BCM_FIELDS_HPP
#define BCM_FIELDS_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "bcm/errors.hpp"

namespace bcm {

namespace detail {

/// Values on a fixed index set. Derived types only add meaning.
class NodalValues {
 public:
  NodalValues() = default;
  explicit NodalValues(std::size_t n, double fill = 0.0) : values_(n, fill) {}
  explicit NodalValues(std::vector<double> values) : values_(std::move(values)) {}

  std::size_t size() const noexcept { return values_.size(); }
  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }
  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }
  const std::vector<double>& vector() const noexcept { return values_; }
  auto begin() noexcept { return values_.begin(); }
  auto end() noexcept { return values_.end(); }
  auto begin() const noexcept { return values_.begin(); }
  auto end() const noexcept { return values_.end(); }

 protected:
  std::vector<double> values_;
};

}  // namespace detail

/// A scalar function on the boundary grid (travel-time profiles, boundary distance functions).
class BoundaryProfile : public detail::NodalValues {
 public:
  using NodalValues::NodalValues;
  BoundaryProfile(std::initializer_list<double> v) : NodalValues(std::vector<double>(v)) {}

  static BoundaryProfile constant(std::size_t n, double value) { return BoundaryProfile(n, value); }

  friend bool operator==(const BoundaryProfile& a, const BoundaryProfile& b) { return a.values_ == b.values_; }
};

/// A scalar function on the interior grid.
class InteriorField : public detail::NodalValues {
 public:
  using NodalValues::NodalValues;
};

/// Pointwise minimum (the lattice meet).
inline BoundaryProfile meet(const BoundaryProfile& tau, const BoundaryProfile& sigma) {
  if (tau.size() != sigma.size()) throw ShapeError("meet: boundary profiles on different grids");
  BoundaryProfile out(tau.size());
  for (std::size_t i = 0; i < tau.size(); ++i) out[i] = std::min(tau[i], sigma[i]);
  return out;
}

inline double sup_distance(const BoundaryProfile& a, const BoundaryProfile& b) {
  if (a.size() != b.size()) throw ShapeError("sup_distance: boundary profiles on different grids");
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

/// Uniform time grid t_k = k dt, k = 0..2N, with t_N = T.
struct TimeGrid {
  double dt = 0.0;
  std::size_t half_steps = 0;  // N

  std::size_t nodes() const noexcept { return 2 * half_steps + 1; }
  double horizon() const noexcept { return dt * static_cast<double>(half_steps); }  // T
  double time(std::size_t k) const noexcept { return dt * static_cast<double>(k); }

  friend bool operator==(const TimeGrid& a, const TimeGrid& b) {
    return a.half_steps == b.half_steps && a.dt == b.dt;
  }
};

/// A function on the time grid times the boundary grid, stored row-major by time.
class SpaceTimeField {
 public:
  SpaceTimeField() = default;
  SpaceTimeField(TimeGrid grid, std::size_t boundary_nodes, double fill = 0.0)
      : grid_(grid), boundary_nodes_(boundary_nodes), values_(grid.nodes() * boundary_nodes, fill) {}

  /// Samples g(t, j) on every node.
  static SpaceTimeField sample(TimeGrid grid, std::size_t boundary_nodes,
                               const std::function<double(double, std::size_t)>& g) {
    SpaceTimeField f(grid, boundary_nodes);
    for (std::size_t k = 0; k < grid.nodes(); ++k)
      for (std::size_t j = 0; j < boundary_nodes; ++j) f(k, j) = g(grid.time(k), j);
    return f;
  }

  const TimeGrid& grid() const noexcept { return grid_; }
  std::size_t time_nodes() const noexcept { return grid_.nodes(); }
  std::size_t boundary_nodes() const noexcept { return boundary_nodes_; }
  std::size_t size() const noexcept { return values_.size(); }

  double& operator()(std::size_t k, std::size_t j) { return values_[k * boundary_nodes_ + j]; }
  double operator()(std::size_t k, std::size_t j) const { return values_[k * boundary_nodes_ + j]; }
  std::span<double> row(std::size_t k) { return {values_.data() + k * boundary_nodes_, boundary_nodes_}; }
  std::span<const double> row(std::size_t k) const {
    return {values_.data() + k * boundary_nodes_, boundary_nodes_};
  }
  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }

  bool same_shape(const SpaceTimeField& o) const noexcept {
    return grid_ == o.grid_ && boundary_nodes_ == o.boundary_nodes_;
  }
  void require_same_shape(const SpaceTimeField& o, const char* where) const {
    if (!same_shape(o)) throw ShapeError(std::string(where) + ": space-time fields on different grids");
  }

  SpaceTimeField& operator+=(const SpaceTimeField& o) {
    require_same_shape(o, "operator+=");
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += o.values_[i];
    return *this;
  }
  SpaceTimeField& operator-=(const SpaceTimeField& o) {
    require_same_shape(o, "operator-=");
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= o.values_[i];
    return *this;
  }
  SpaceTimeField& operator*=(double a) {
    for (double& v : values_) v *= a;
    return *this;
  }
  /// this += a * x
  void axpy(double a, const SpaceTimeField& x) {
    require_same_shape(x, "axpy");
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += a * x.values_[i];
  }

  friend SpaceTimeField operator+(SpaceTimeField a, const SpaceTimeField& b) { return a += b; }
  friend SpaceTimeField operator-(SpaceTimeField a, const SpaceTimeField& b) { return a -= b; }
  friend SpaceTimeField operator*(double s, SpaceTimeField a) { return a *= s; }
  friend bool operator==(const SpaceTimeField& a, const SpaceTimeField& b) {
    return a.same_shape(b) && a.values_ == b.values_;
  }

  bool all_finite() const {
    return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
  }

  /// FNV-1a over the grid shape and the raw value bits; keys replayed traces.
  std::uint64_t content_hash() const {
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&h](const void* p, std::size_t n) {
      const auto* b = static_cast<const unsigned char*>(p);
      for (std::size_t i = 0; i < n; ++i) {
        h ^= b[i];
        h *= 1099511628211ull;
      }
    };
    const std::uint64_t shape[2] = {grid_.half_steps, boundary_nodes_};
    mix(shape, sizeof shape);
    mix(&grid_.dt, sizeof grid_.dt);
    for (double v : values_) {
      if (v == 0.0) v = 0.0;  // fold -0.0
      mix(&v, sizeof v);
    }
    return h;
  }

 private:
  TimeGrid grid_;
  std::size_t boundary_nodes_ = 0;
  std::vector<double> values_;
};

}  // namespace bcm

#endif  // BCM_FIELDS_HPP
