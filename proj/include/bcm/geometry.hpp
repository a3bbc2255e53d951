#ifndef BCM_GEOMETRY_HPP
#define BCM_GEOMETRY_HPP

// Grids, wave-speed models and travel-time distances.
//
// Every other module checks its numbers against what is computed here, so the
// travel times are deliberately more accurate than the wave solver: 1-D
// distances use composite Simpson on a 4x refined grid, 2-D distances use
// first-order fast marching with an exactly initialised ball around the source.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <numbers>
#include <queue>
#include <span>
#include <thread>
#include <utility>
#include <variant>
#include <vector>

#include "bcm/errors.hpp"
#include "bcm/fields.hpp"

namespace bcm {

enum class Shape { interval, rectangle, disk };

inline const char* to_string(Shape s) {
  switch (s) {
    case Shape::interval: return "interval";
    case Shape::rectangle: return "rectangle";
    case Shape::disk: return "disk";
  }
  return "?";
}

struct Point {
  double x = 0.0;
  double y = 0.0;
};

inline double distance(Point a, Point b) { return std::hypot(a.x - b.x, a.y - b.y); }

/// Domain geometry and resolution. `resolution` counts grid cells per unit
/// length, so h = 1 / resolution (adjusted to divide the side lengths).
struct DomainSpec {
  Shape shape = Shape::interval;
  double length = 1.0;  // interval
  double width = 1.0;   // rectangle
  double height = 1.0;  // rectangle
  double radius = 1.0;  // disk
  double resolution = 100.0;
  std::size_t boundary_resolution = 64;  // disk: number of boundary nodes

  static DomainSpec interval(double length, double resolution) {
    DomainSpec s;
    s.shape = Shape::interval;
    s.length = length;
    s.resolution = resolution;
    return s;
  }
  static DomainSpec rectangle(double width, double height, double resolution) {
    DomainSpec s;
    s.shape = Shape::rectangle;
    s.width = width;
    s.height = height;
    s.resolution = resolution;
    return s;
  }
  static DomainSpec disk(double radius, double resolution, std::size_t boundary_resolution) {
    DomainSpec s;
    s.shape = Shape::disk;
    s.radius = radius;
    s.resolution = resolution;
    s.boundary_resolution = boundary_resolution;
    return s;
  }

  int dimension() const noexcept { return shape == Shape::interval ? 1 : 2; }

  void validate() const {
    auto positive = [](double v, const char* what) {
      if (!(v > 0.0) || !std::isfinite(v)) throw ConfigurationError(std::string(what) + " must be positive");
    };
    switch (shape) {
      case Shape::interval: positive(length, "interval length"); break;
      case Shape::rectangle:
        positive(width, "rectangle width");
        positive(height, "rectangle height");
        break;
      case Shape::disk: positive(radius, "disk radius"); break;
    }
    positive(resolution, "resolution");
    if (shape == Shape::disk && boundary_resolution < 2)
      throw ConfigurationError("disk boundary resolution must be at least 2 nodes");
  }
};

/// Interior and boundary grids. Interior nodes sit on a Cartesian lattice;
/// for the disk only lattice nodes whose cell meets the boundary polygon are
/// interior nodes, and a slightly larger `active` set carries travel times.
struct Grid {
  DomainSpec spec;
  int dim = 1;
  double hx = 0.0;
  double hy = 0.0;
  std::size_t nx = 0;  // lattice extents in nodes
  std::size_t ny = 1;
  Point origin;

  std::vector<Point> nodes;
  std::vector<double> weights;  // Euclidean quadrature weights
  std::vector<std::size_t> lattice_of_node;
  std::vector<std::ptrdiff_t> node_of_lattice;  // -1 when the lattice node is not interior
  std::vector<unsigned char> active;

  std::vector<Point> boundary_nodes;
  std::vector<double> boundary_weights;  // Euclidean arc-length weights (counting measure in 1-D)
  std::vector<Point> boundary_normals;
  std::vector<std::ptrdiff_t> boundary_node_index;  // interior node at the boundary point, or -1

  std::size_t interior_size() const noexcept { return nodes.size(); }
  std::size_t boundary_size() const noexcept { return boundary_nodes.size(); }
  std::size_t lattice_size() const noexcept { return nx * ny; }
  double h() const noexcept { return std::max(hx, hy); }
  std::size_t lattice_index(std::size_t i, std::size_t j) const noexcept { return j * nx + i; }
  Point lattice_point(std::size_t i, std::size_t j) const noexcept {
    return {origin.x + static_cast<double>(i) * hx, origin.y + static_cast<double>(j) * hy};
  }
  Point lattice_point(std::size_t l) const noexcept { return lattice_point(l % nx, l / nx); }

  bool contains(Point p, double tol = 1e-12) const {
    switch (spec.shape) {
      case Shape::interval: return p.x >= -tol && p.x <= spec.length + tol;
      case Shape::rectangle:
        return p.x >= -tol && p.x <= spec.width + tol && p.y >= -tol && p.y <= spec.height + tol;
      case Shape::disk: return std::hypot(p.x, p.y) <= spec.radius + tol;
    }
    return false;
  }
};

namespace detail {

inline std::size_t cells_along(double extent, double resolution, const char* what) {
  const double n = std::round(extent * resolution);
  if (n < 1.0) throw ConfigurationError(std::string(what) + ": resolution too coarse (fewer than 2 nodes)");
  return static_cast<std::size_t>(n);
}

/// Inside test for the regular boundary polygon of the disk.
inline bool inside_polygon(Point p, double radius, std::size_t sides) {
  const double dtheta = 2.0 * std::numbers::pi / static_cast<double>(sides);
  double theta = std::atan2(p.y, p.x);
  if (theta < 0.0) theta += 2.0 * std::numbers::pi;
  auto k = static_cast<std::size_t>(theta / dtheta);
  if (k >= sides) k = sides - 1;
  const double mid = (static_cast<double>(k) + 0.5) * dtheta;
  return p.x * std::cos(mid) + p.y * std::sin(mid) <= radius * std::cos(0.5 * dtheta);
}

}  // namespace detail

inline Grid build_grids(const DomainSpec& spec) {
  spec.validate();
  Grid g;
  g.spec = spec;
  g.dim = spec.dimension();

  if (spec.shape == Shape::interval) {
    const std::size_t cells = detail::cells_along(spec.length, spec.resolution, "interval");
    g.hx = spec.length / static_cast<double>(cells);
    g.hy = 0.0;
    g.nx = cells + 1;
    g.ny = 1;
    for (std::size_t i = 0; i <= cells; ++i) {
      g.nodes.push_back({i == cells ? spec.length : static_cast<double>(i) * g.hx, 0.0});
      g.weights.push_back((i == 0 || i == cells) ? 0.5 * g.hx : g.hx);
      g.lattice_of_node.push_back(i);
      g.node_of_lattice.push_back(static_cast<std::ptrdiff_t>(i));
    }
    g.active.assign(g.nx, 1);
    g.boundary_nodes = {{0.0, 0.0}, {spec.length, 0.0}};
    g.boundary_weights = {1.0, 1.0};
    g.boundary_normals = {{-1.0, 0.0}, {1.0, 0.0}};
    g.boundary_node_index = {0, static_cast<std::ptrdiff_t>(cells)};
    return g;
  }

  if (spec.shape == Shape::rectangle) {
    const std::size_t cx = detail::cells_along(spec.width, spec.resolution, "rectangle width");
    const std::size_t cy = detail::cells_along(spec.height, spec.resolution, "rectangle height");
    g.hx = spec.width / static_cast<double>(cx);
    g.hy = spec.height / static_cast<double>(cy);
    g.nx = cx + 1;
    g.ny = cy + 1;
    g.node_of_lattice.assign(g.nx * g.ny, -1);
    for (std::size_t j = 0; j < g.ny; ++j) {
      for (std::size_t i = 0; i < g.nx; ++i) {
        const double wx = (i == 0 || i == cx) ? 0.5 * g.hx : g.hx;
        const double wy = (j == 0 || j == cy) ? 0.5 * g.hy : g.hy;
        g.node_of_lattice[g.lattice_index(i, j)] = static_cast<std::ptrdiff_t>(g.nodes.size());
        g.nodes.push_back(g.lattice_point(i, j));
        g.weights.push_back(wx * wy);
        g.lattice_of_node.push_back(g.lattice_index(i, j));
      }
    }
    g.active.assign(g.nx * g.ny, 1);
    // Counter-clockwise from the origin corner.
    auto add = [&g](std::size_t i, std::size_t j, Point normal, double weight) {
      g.boundary_nodes.push_back(g.lattice_point(i, j));
      g.boundary_normals.push_back(normal);
      g.boundary_weights.push_back(weight);
      g.boundary_node_index.push_back(g.node_of_lattice[g.lattice_index(i, j)]);
    };
    const double r2 = std::numbers::sqrt2 / 2.0;
    const double corner = 0.5 * (g.hx + g.hy);
    for (std::size_t i = 0; i < cx; ++i) add(i, 0, i == 0 ? Point{-r2, -r2} : Point{0, -1}, i == 0 ? corner : g.hx);
    for (std::size_t j = 0; j < cy; ++j) add(cx, j, j == 0 ? Point{r2, -r2} : Point{1, 0}, j == 0 ? corner : g.hy);
    for (std::size_t i = cx; i > 0; --i) add(i, cy, i == cx ? Point{r2, r2} : Point{0, 1}, i == cx ? corner : g.hx);
    for (std::size_t j = cy; j > 0; --j) add(0, j, j == cy ? Point{-r2, r2} : Point{-1, 0}, j == cy ? corner : g.hy);
    return g;
  }

  // Disk: polar-masked Cartesian lattice centred at the origin.
  const double rho = spec.radius;
  const double h = 1.0 / spec.resolution;
  if (rho / h < 1.0) throw ConfigurationError("disk: resolution too coarse (fewer than 2 nodes across)");
  const std::size_t sides = spec.boundary_resolution;
  const auto half = static_cast<std::size_t>(std::ceil(rho / h)) + 3;
  g.hx = g.hy = h;
  g.nx = g.ny = 2 * half + 1;
  g.origin = {-static_cast<double>(half) * h, -static_cast<double>(half) * h};
  g.node_of_lattice.assign(g.nx * g.ny, -1);
  g.active.assign(g.nx * g.ny, 0);
  const double apothem = rho * std::cos(std::numbers::pi / static_cast<double>(sides));
  const double half_diag = std::numbers::sqrt2 * 0.5 * h;
  constexpr int sub = 8;
  for (std::size_t j = 0; j < g.ny; ++j) {
    for (std::size_t i = 0; i < g.nx; ++i) {
      const Point p = g.lattice_point(i, j);
      const double r = std::hypot(p.x, p.y);
      const std::size_t l = g.lattice_index(i, j);
      if (r <= rho + 2.5 * h) g.active[l] = 1;
      double fraction = 0.0;
      if (r + half_diag <= apothem) {
        fraction = 1.0;
      } else if (r - half_diag <= rho) {
        int inside = 0;
        for (int a = 0; a < sub; ++a)
          for (int b = 0; b < sub; ++b) {
            const Point q{p.x + (a + 0.5) / sub * h - 0.5 * h, p.y + (b + 0.5) / sub * h - 0.5 * h};
            inside += detail::inside_polygon(q, rho, sides) ? 1 : 0;
          }
        fraction = static_cast<double>(inside) / (sub * sub);
      }
      if (fraction > 0.0) {
        g.node_of_lattice[l] = static_cast<std::ptrdiff_t>(g.nodes.size());
        g.nodes.push_back(p);
        g.weights.push_back(fraction * h * h);
        g.lattice_of_node.push_back(l);
      }
    }
  }
  for (std::size_t k = 0; k < sides; ++k) {
    const double theta = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(sides);
    g.boundary_nodes.push_back({rho * std::cos(theta), rho * std::sin(theta)});
    g.boundary_normals.push_back({std::cos(theta), std::sin(theta)});
    g.boundary_weights.push_back(2.0 * std::numbers::pi * rho / static_cast<double>(sides));
    g.boundary_node_index.push_back(-1);
  }
  return g;
}

// ---------------------------------------------------------------------------
// Wave speed

struct ConstantSpeed {
  double c0 = 1.0;
};
/// c0 + gx x + gy y
struct LinearSpeed {
  double c0 = 1.0;
  double gx = 0.0;
  double gy = 0.0;
};
/// c0 + amplitude sin(wavenumber pi x)
struct SineSpeed {
  double c0 = 1.0;
  double amplitude = 0.0;
  double wavenumber = 1.0;
};
/// c0 + amplitude exp(-|p - center|^2 / width^2)
struct BumpSpeed {
  double c0 = 1.0;
  double amplitude = 0.0;
  Point center;
  double width = 0.25;
};
/// Values on the interior grid nodes.
struct SampledSpeed {
  std::vector<double> values;
};

using SpeedModel = std::variant<ConstantSpeed, LinearSpeed, SineSpeed, BumpSpeed, SampledSpeed>;

inline const char* profile_tag(const SpeedModel& m) {
  switch (m.index()) {
    case 0: return "constant";
    case 1: return "linear";
    case 2: return "sine";
    case 3: return "smooth-bump";
    default: return "sampled";
  }
}

/// Wave speed sampled on a grid, with the metric densities of g = c^-2 delta
/// and mu = c^(n-2): interior density c^-2, boundary density c^(1-n).
class SpeedField {
 public:
  SpeedField(std::shared_ptr<const Grid> grid, SpeedModel model) : grid_(std::move(grid)), model_(std::move(model)) {
    if (!grid_) throw ConfigurationError("SpeedField: null grid");
    const Grid& g = *grid_;
    if (const auto* s = std::get_if<SampledSpeed>(&model_); s && s->values.size() != g.interior_size())
      throw ConfigurationError("sampled speed: expected " + std::to_string(g.interior_size()) + " values, got " +
                               std::to_string(s->values.size()));
    lattice_.assign(g.lattice_size(), 0.0);
    if (std::holds_alternative<SampledSpeed>(model_)) {
      fill_sampled_lattice();
    } else {
      for (std::size_t l = 0; l < g.lattice_size(); ++l)
        if (g.active[l]) lattice_[l] = analytic(g.lattice_point(l));
    }
    interior_.resize(g.interior_size());
    for (std::size_t i = 0; i < g.interior_size(); ++i) interior_[i] = lattice_[g.lattice_of_node[i]];
    boundary_.resize(g.boundary_size());
    for (std::size_t j = 0; j < g.boundary_size(); ++j) boundary_[j] = at(g.boundary_nodes[j]);
    for (std::size_t l = 0; l < g.lattice_size(); ++l)
      if (g.active[l] && !(lattice_[l] > 0.0 && std::isfinite(lattice_[l])))
        throw ConfigurationError("wave speed must be strictly positive and finite");
    for (double b : boundary_)
      if (!(b > 0.0 && std::isfinite(b))) throw ConfigurationError("wave speed must be strictly positive and finite");
  }

  const Grid& grid() const noexcept { return *grid_; }
  const std::shared_ptr<const Grid>& grid_ptr() const noexcept { return grid_; }
  const SpeedModel& model() const noexcept { return model_; }
  std::span<const double> samples() const noexcept { return interior_; }
  std::span<const double> lattice_samples() const noexcept { return lattice_; }
  std::span<const double> boundary_samples() const noexcept { return boundary_; }

  double max() const { return std::max(*std::max_element(interior_.begin(), interior_.end()),
                                       *std::max_element(boundary_.begin(), boundary_.end())); }
  double min() const { return std::min(*std::min_element(interior_.begin(), interior_.end()),
                                       *std::min_element(boundary_.begin(), boundary_.end())); }

  /// Speed at an arbitrary point of the domain.
  double at(Point p) const {
    if (!std::holds_alternative<SampledSpeed>(model_)) return analytic(p);
    const Grid& g = *grid_;
    const double fx = std::clamp((p.x - g.origin.x) / g.hx, 0.0, static_cast<double>(g.nx - 1));
    const auto i = std::min(static_cast<std::size_t>(fx), g.nx >= 2 ? g.nx - 2 : 0);
    const double ax = fx - static_cast<double>(i);
    if (g.dim == 1) return (1.0 - ax) * lattice_[i] + ax * lattice_[i + 1];
    const double fy = std::clamp((p.y - g.origin.y) / g.hy, 0.0, static_cast<double>(g.ny - 1));
    const auto j = std::min(static_cast<std::size_t>(fy), g.ny - 2);
    const double ay = fy - static_cast<double>(j);
    return (1 - ax) * (1 - ay) * lattice_[g.lattice_index(i, j)] + ax * (1 - ay) * lattice_[g.lattice_index(i + 1, j)] +
           (1 - ax) * ay * lattice_[g.lattice_index(i, j + 1)] + ax * ay * lattice_[g.lattice_index(i + 1, j + 1)];
  }

  /// Quadrature weights of the natural measure dV_mu = c^-2 dx.
  std::vector<double> natural_weights() const {
    std::vector<double> w(interior_.size());
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = grid_->weights[i] / (interior_[i] * interior_[i]);
    return w;
  }

  /// Quadrature weights of dS_g: arc weight times c^(1-n). Exactly 1 per endpoint in 1-D.
  std::vector<double> boundary_measure_weights() const {
    std::vector<double> w(boundary_.size());
    const int n = grid_->dim;
    for (std::size_t j = 0; j < w.size(); ++j)
      w[j] = grid_->boundary_weights[j] * (n == 1 ? 1.0 : std::pow(boundary_[j], 1.0 - n));
    return w;
  }

 private:
  double analytic(Point p) const {
    return std::visit(
        [&](const auto& m) -> double {
          using M = std::decay_t<decltype(m)>;
          if constexpr (std::is_same_v<M, ConstantSpeed>) {
            return m.c0;
          } else if constexpr (std::is_same_v<M, LinearSpeed>) {
            return m.c0 + m.gx * p.x + m.gy * p.y;
          } else if constexpr (std::is_same_v<M, SineSpeed>) {
            return m.c0 + m.amplitude * std::sin(m.wavenumber * std::numbers::pi * p.x);
          } else if constexpr (std::is_same_v<M, BumpSpeed>) {
            const double r2 = (p.x - m.center.x) * (p.x - m.center.x) + (p.y - m.center.y) * (p.y - m.center.y);
            return m.c0 + m.amplitude * std::exp(-r2 / (m.width * m.width));
          } else {
            return std::numeric_limits<double>::quiet_NaN();
          }
        },
        model_);
  }

  // Interior samples go to their lattice nodes; other active nodes copy the
  // nearest interior value (breadth-first).
  void fill_sampled_lattice() {
    const Grid& g = *grid_;
    const auto& v = std::get<SampledSpeed>(model_).values;
    std::vector<unsigned char> set(g.lattice_size(), 0);
    std::queue<std::size_t> frontier;
    for (std::size_t i = 0; i < g.interior_size(); ++i) {
      lattice_[g.lattice_of_node[i]] = v[i];
      set[g.lattice_of_node[i]] = 1;
      frontier.push(g.lattice_of_node[i]);
    }
    while (!frontier.empty()) {
      const std::size_t l = frontier.front();
      frontier.pop();
      const std::size_t i = l % g.nx, j = l / g.nx;
      auto visit = [&](std::size_t ii, std::size_t jj) {
        const std::size_t m = g.lattice_index(ii, jj);
        if (!g.active[m] || set[m]) return;
        lattice_[m] = lattice_[l];
        set[m] = 1;
        frontier.push(m);
      };
      if (i > 0) visit(i - 1, j);
      if (i + 1 < g.nx) visit(i + 1, j);
      if (j > 0) visit(i, j - 1);
      if (j + 1 < g.ny) visit(i, j + 1);
    }
  }

  std::shared_ptr<const Grid> grid_;
  SpeedModel model_;
  std::vector<double> lattice_;
  std::vector<double> interior_;
  std::vector<double> boundary_;
};

inline SpeedField make_speed(const DomainSpec& spec, SpeedModel model) {
  return SpeedField(std::make_shared<const Grid>(build_grids(spec)), std::move(model));
}

// ---------------------------------------------------------------------------
// 1-D travel times

/// d(x, y) = |int_x^y c(s)^-1 ds| by composite Simpson on subintervals of at most h/4.
inline double travel_time_1d(const SpeedField& c, double x, double y) {
  const Grid& g = c.grid();
  if (g.dim != 1) throw DomainError("travel_time_1d: interval domain required");
  const double L = g.spec.length;
  constexpr double tol = 1e-12;
  if (x < -tol || x > L + tol || y < -tol || y > L + tol) throw DomainError("travel_time_1d: point outside [0, L]");
  if (x == y) return 0.0;
  const double a = std::min(x, y), b = std::max(x, y);
  auto n = static_cast<std::size_t>(std::ceil(4.0 * (b - a) / g.hx));
  n = std::max<std::size_t>(2, n + (n % 2));
  const double s = (b - a) / static_cast<double>(n);
  double sum = 1.0 / c.at({a, 0}) + 1.0 / c.at({b, 0});
  for (std::size_t k = 1; k < n; ++k) sum += (k % 2 ? 4.0 : 2.0) / c.at({a + static_cast<double>(k) * s, 0});
  return sum * s / 3.0;
}

/// Travel time from x = 0 to every interior node, cell by cell with 4-interval Simpson.
inline std::vector<double> cumulative_travel_time_1d(const SpeedField& c) {
  const Grid& g = c.grid();
  if (g.dim != 1) throw DomainError("cumulative_travel_time_1d: interval domain required");
  std::vector<double> cum(g.interior_size(), 0.0);
  for (std::size_t i = 1; i < cum.size(); ++i) {
    const double a = g.nodes[i - 1].x, b = g.nodes[i].x, s = (b - a) / 4.0;
    const double sum = 1.0 / c.at({a, 0}) + 4.0 / c.at({a + s, 0}) + 2.0 / c.at({a + 2 * s, 0}) +
                       4.0 / c.at({a + 3 * s, 0}) + 1.0 / c.at({b, 0});
    cum[i] = cum[i - 1] + sum * s / 3.0;
  }
  return cum;
}

// ---------------------------------------------------------------------------
// Fast marching

struct FastMarchingOptions {
  /// Lattice nodes within this many cells of a point source are initialised
  /// with straight-ray travel times.
  double init_radius_cells = 6.0;
};

namespace detail {

struct Seed {
  std::size_t lattice;
  double value;
};

/// Second-order upwind fast marching with a lazily pruned binary heap.
inline std::vector<double> fast_march(const Grid& g, std::span<const double> speed, std::span<const Seed> seeds) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  const std::size_t n = g.lattice_size();
  std::vector<double> t(n, inf);
  std::vector<unsigned char> state(n, 0);  // 0 far, 1 trial, 2 known
  using Entry = std::pair<double, std::size_t>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> heap;

  for (const Seed& s : seeds) {
    if (!g.active[s.lattice]) continue;
    if (s.value < t[s.lattice]) t[s.lattice] = s.value;
    state[s.lattice] = 2;
  }
  // Per axis: the upwind term alpha (t - beta)^2, second order when the next
  // node on the same side is known and not later than the first.
  struct Term {
    double alpha, beta, first;
  };
  auto axis_term = [&](std::size_t l, std::size_t idx, std::size_t len, std::size_t stride, double h) {
    Term best{0.0, inf, inf};
    for (int side = -1; side <= 1; side += 2) {
      if (side < 0 ? idx < 1 : idx + 1 >= len) continue;
      const std::size_t m1 = side < 0 ? l - stride : l + stride;
      if (state[m1] != 2 || t[m1] >= best.first) continue;
      best = {1.0 / (h * h), t[m1], t[m1]};
      if (side < 0 ? idx < 2 : idx + 2 >= len) continue;
      const std::size_t m2 = side < 0 ? m1 - stride : m1 + stride;
      if (state[m2] == 2 && t[m2] <= t[m1]) best = {2.25 / (h * h), (4.0 * t[m1] - t[m2]) / 3.0, t[m1]};
    }
    return best;
  };

  auto update = [&](std::size_t l) {
    const std::size_t i = l % g.nx, j = l / g.nx;
    const double s = 1.0 / speed[l];
    Term a = axis_term(l, i, g.nx, 1, g.hx), b = axis_term(l, j, g.ny, g.nx, g.hy);
    if (b.first < a.first) std::swap(a, b);
    if (a.first == inf) return;
    double cand = a.beta + s / std::sqrt(a.alpha);
    if (b.first < inf) {
      const double q = a.alpha + b.alpha, p = a.alpha * a.beta + b.alpha * b.beta;
      const double disc = p * p - q * (a.alpha * a.beta * a.beta + b.alpha * b.beta * b.beta - s * s);
      if (disc >= 0.0) {
        const double root = (p + std::sqrt(disc)) / q;
        if (root >= b.first) cand = root;
      }
    }
    if (cand < t[l]) {
      t[l] = cand;
      state[l] = 1;
      heap.emplace(cand, l);
    }
  };
  auto relax_neighbours = [&](std::size_t l) {
    const std::size_t i = l % g.nx, j = l / g.nx;
    auto visit = [&](std::size_t m) {
      if (g.active[m] && state[m] != 2) update(m);
    };
    if (i > 0) visit(l - 1);
    if (i + 1 < g.nx) visit(l + 1);
    if (j > 0) visit(l - g.nx);
    if (j + 1 < g.ny) visit(l + g.nx);
  };

  for (std::size_t l = 0; l < n; ++l)
    if (state[l] == 2) relax_neighbours(l);
  while (!heap.empty()) {
    const auto [v, l] = heap.top();
    heap.pop();
    if (state[l] == 2 || v > t[l]) continue;
    state[l] = 2;
    relax_neighbours(l);
  }
  return t;
}

inline std::vector<Seed> point_source_seeds(const SpeedField& c, Point p, const FastMarchingOptions& opt) {
  const Grid& g = c.grid();
  const double radius = opt.init_radius_cells * g.h();
  const double sp = 1.0 / c.at(p);
  std::vector<Seed> seeds;
  const auto lo_i = static_cast<std::ptrdiff_t>(std::floor((p.x - radius - g.origin.x) / g.hx));
  const auto hi_i = static_cast<std::ptrdiff_t>(std::ceil((p.x + radius - g.origin.x) / g.hx));
  const auto lo_j = static_cast<std::ptrdiff_t>(std::floor((p.y - radius - g.origin.y) / g.hy));
  const auto hi_j = static_cast<std::ptrdiff_t>(std::ceil((p.y + radius - g.origin.y) / g.hy));
  const auto lattice = c.lattice_samples();
  for (std::ptrdiff_t j = std::max<std::ptrdiff_t>(lo_j, 0); j <= std::min<std::ptrdiff_t>(hi_j, g.ny - 1); ++j) {
    for (std::ptrdiff_t i = std::max<std::ptrdiff_t>(lo_i, 0); i <= std::min<std::ptrdiff_t>(hi_i, g.nx - 1); ++i) {
      const std::size_t l = g.lattice_index(i, j);
      if (!g.active[l]) continue;
      const double r = distance(g.lattice_point(i, j), p);
      if (r <= radius) seeds.push_back({l, r * 0.5 * (sp + 1.0 / lattice[l])});
    }
  }
  if (seeds.empty()) throw DomainError("fast marching: source point is outside the grid");
  return seeds;
}

inline double bilinear(const Grid& g, std::span<const double> lattice_values, Point p) {
  const double fx = std::clamp((p.x - g.origin.x) / g.hx, 0.0, static_cast<double>(g.nx - 1));
  const double fy = std::clamp((p.y - g.origin.y) / g.hy, 0.0, static_cast<double>(g.ny - 1));
  const auto i = std::min(static_cast<std::size_t>(fx), g.nx - 2);
  const auto j = std::min(static_cast<std::size_t>(fy), g.ny - 2);
  const double ax = fx - static_cast<double>(i), ay = fy - static_cast<double>(j);
  const double v00 = lattice_values[g.lattice_index(i, j)], v10 = lattice_values[g.lattice_index(i + 1, j)];
  const double v01 = lattice_values[g.lattice_index(i, j + 1)], v11 = lattice_values[g.lattice_index(i + 1, j + 1)];
  if (!std::isfinite(v00 + v10 + v01 + v11)) throw DomainError("interpolation stencil leaves the active grid");
  return (1 - ax) * (1 - ay) * v00 + ax * (1 - ay) * v10 + (1 - ax) * ay * v01 + ax * ay * v11;
}

inline void require_2d(const SpeedField& c, const char* where) {
  if (c.grid().dim != 2) throw DomainError(std::string(where) + ": rectangle or disk domain required");
}

}  // namespace detail

/// Travel times d(p, .) on the whole active lattice.
inline std::vector<double> travel_time_lattice(const SpeedField& c, Point p, const FastMarchingOptions& opt = {}) {
  detail::require_2d(c, "travel_time_lattice");
  const auto seeds = detail::point_source_seeds(c, p, opt);
  return detail::fast_march(c.grid(), c.lattice_samples(), seeds);
}

inline InteriorField lattice_to_interior(const Grid& g, std::span<const double> lattice_values) {
  InteriorField out(g.interior_size());
  for (std::size_t i = 0; i < g.interior_size(); ++i) out[i] = lattice_values[g.lattice_of_node[i]];
  return out;
}

/// d(y_source, x) at every interior node, solving |grad d| = 1/c by fast marching.
inline InteriorField travel_time_field_2d(const SpeedField& c, std::size_t source, const FastMarchingOptions& opt = {}) {
  detail::require_2d(c, "travel_time_field_2d");
  const Grid& g = c.grid();
  if (source >= g.boundary_size()) throw DomainError("travel_time_field_2d: boundary node out of range");
  return lattice_to_interior(g, travel_time_lattice(c, g.boundary_nodes[source], opt));
}

/// r_x(y) = d(x, y) at every boundary node; in 2-D one march from x (reciprocity).
inline BoundaryProfile boundary_distance_function(const SpeedField& c, Point x, const FastMarchingOptions& opt = {}) {
  const Grid& g = c.grid();
  if (!g.contains(x, 1e-9)) throw DomainError("boundary_distance_function: point outside the domain");
  BoundaryProfile r(g.boundary_size());
  if (g.dim == 1) {
    const double px = std::clamp(x.x, 0.0, g.spec.length);
    for (std::size_t j = 0; j < g.boundary_size(); ++j) r[j] = travel_time_1d(c, px, g.boundary_nodes[j].x);
    return r;
  }
  const auto field = travel_time_lattice(c, x, opt);
  for (std::size_t j = 0; j < g.boundary_size(); ++j) r[j] = detail::bilinear(g, field, g.boundary_nodes[j]);
  return r;
}

/// Integral of indicator * c^-2 over the interior grid.
inline double natural_volume(const SpeedField& c, const InteriorField& indicator) {
  const Grid& g = c.grid();
  if (indicator.size() != g.interior_size()) throw ShapeError("natural_volume: indicator is not on the interior grid");
  const auto s = c.samples();
  double v = 0.0;
  for (std::size_t i = 0; i < indicator.size(); ++i) {
    if (indicator[i] < 0.0 || indicator[i] > 1.0) throw DomainError("natural_volume: indicator values must lie in [0, 1]");
    v += indicator[i] * g.weights[i] / (s[i] * s[i]);
  }
  return v;
}

/// d(y_j, x_i) for every boundary node j and interior node i.
class DistanceTable {
 public:
  explicit DistanceTable(const SpeedField& c, unsigned jobs = 1, const FastMarchingOptions& opt = {})
      : grid_(c.grid_ptr()) {
    const Grid& g = *grid_;
    rows_.resize(g.boundary_size());
    if (g.dim == 1) {
      const auto cum = cumulative_travel_time_1d(c);
      const double total = cum.back();
      rows_[0] = InteriorField(cum);
      InteriorField right(cum.size());
      for (std::size_t i = 0; i < cum.size(); ++i) right[i] = total - cum[i];
      rows_[1] = std::move(right);
      return;
    }
    jobs = std::max(1u, jobs);
    auto work = [&](std::size_t first) {
      for (std::size_t j = first; j < rows_.size(); j += jobs) rows_[j] = travel_time_field_2d(c, j, opt);
    };
    if (jobs == 1) {
      work(0);
    } else {
      std::vector<std::thread> pool;
      for (unsigned t = 0; t < jobs; ++t) pool.emplace_back(work, t);
      for (auto& th : pool) th.join();
    }
  }

  const Grid& grid() const noexcept { return *grid_; }
  std::size_t boundary_size() const noexcept { return rows_.size(); }
  const InteriorField& from_boundary(std::size_t j) const { return rows_.at(j); }
  double operator()(std::size_t j, std::size_t i) const { return rows_[j][i]; }

  /// r_x over the boundary for interior node i.
  BoundaryProfile profile_at(std::size_t i) const {
    BoundaryProfile r(rows_.size());
    for (std::size_t j = 0; j < rows_.size(); ++j) r[j] = rows_[j][i];
    return r;
  }

 private:
  std::shared_ptr<const Grid> grid_;
  std::vector<InteriorField> rows_;
};

}  // namespace bcm

#endif  // BCM_GEOMETRY_HPP
