#ifndef BCM_CONTROL_HPP
#define BCM_CONTROL_HPP

// Time-axis operators on (0, 2T) x boundary and the connecting operator
//
//   K = J Lambda - R Lambda R J,
//
// applied through two measurements. J is the midpoint rule on every other
// node of [t, 2T - t]; paired with the leapfrog solver's half-weighted start
// this makes (f, K h) equal the discrete interior product (u^f(T), u^h(T))
// exactly, so K is symmetric positive semidefinite to rounding.

#include <cstddef>
#include <span>
#include <vector>

#include "bcm/errors.hpp"
#include "bcm/fields.hpp"
#include "bcm/forward.hpp"

namespace bcm {

/// Trapezoidal weights in time times dS_g weights on the boundary.
struct InnerProductWeights {
  std::vector<double> time;
  std::vector<double> boundary;

  static InnerProductWeights make(const TimeGrid& grid, std::span<const double> boundary_weights) {
    InnerProductWeights w;
    w.time.assign(grid.nodes(), grid.dt);
    w.time.front() *= 0.5;
    w.time.back() *= 0.5;
    w.boundary.assign(boundary_weights.begin(), boundary_weights.end());
    return w;
  }
  static InnerProductWeights make(const MeasurementDevice& device) {
    return make(device.time_grid(), device.boundary_weights());
  }
};

inline double inner(const SpaceTimeField& f, const SpaceTimeField& h, const InnerProductWeights& w) {
  f.require_same_shape(h, "inner");
  if (w.time.size() != f.time_nodes() || w.boundary.size() != f.boundary_nodes())
    throw ShapeError("inner: weights do not match the field grid");
  double total = 0.0;
  for (std::size_t k = 0; k < f.time_nodes(); ++k) {
    const auto a = f.row(k), b = h.row(k);
    double s = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) s += w.boundary[j] * a[j] * b[j];
    total += w.time[k] * s;
  }
  return total;
}

inline double norm(const SpaceTimeField& f, const InnerProductWeights& w) { return std::sqrt(inner(f, f, w)); }

/// R f(t) = f(2T - t)
inline SpaceTimeField op_R(const SpaceTimeField& f) {
  SpaceTimeField out(f.grid(), f.boundary_nodes());
  const std::size_t last = f.time_nodes() - 1;
  for (std::size_t k = 0; k <= last; ++k) {
    const auto src = f.row(last - k);
    std::copy(src.begin(), src.end(), out.row(k).begin());
  }
  return out;
}

/// J f(t_p) = dt * sum of f(t_q), q = p+1, p+3, ..., 2N-p-1, for p < N; zero for t >= T.
inline SpaceTimeField op_J(const SpaceTimeField& f) {
  const std::size_t n = f.grid().half_steps, nt = f.time_nodes(), nb = f.boundary_nodes();
  const double dt = f.grid().dt;
  SpaceTimeField out(f.grid(), nb);
  // parity[q] = f^q + f^{q-2} + ...
  std::vector<double> parity(nt * nb, 0.0);
  for (std::size_t q = 0; q < nt; ++q)
    for (std::size_t j = 0; j < nb; ++j) parity[q * nb + j] = f(q, j) + (q >= 2 ? parity[(q - 2) * nb + j] : 0.0);
  for (std::size_t p = 0; p < n; ++p) {
    const std::size_t hi = 2 * n - p - 1;
    for (std::size_t j = 0; j < nb; ++j) {
      const double below = p >= 1 ? parity[(p - 1) * nb + j] : 0.0;
      out(p, j) = dt * (parity[hi * nb + j] - below);
    }
  }
  return out;
}

/// I f(t) = 1_{(0,T)}(t) * int_0^t f, trapezoidal.
inline SpaceTimeField op_I(const SpaceTimeField& f) {
  const std::size_t n = f.grid().half_steps, nb = f.boundary_nodes();
  const double dt = f.grid().dt;
  SpaceTimeField out(f.grid(), nb);
  for (std::size_t j = 0; j < nb; ++j) {
    double running = 0.0;
    for (std::size_t k = 1; k < n; ++k) {
      running += 0.5 * dt * (f(k - 1, j) + f(k, j));
      out(k, j) = running;
    }
  }
  return out;
}

/// Exact transpose of op_I under the trapezoidal time weights.
inline SpaceTimeField op_I_adjoint(const SpaceTimeField& h) {
  const std::size_t n = h.grid().half_steps, nb = h.boundary_nodes();
  const double dt = h.grid().dt;
  SpaceTimeField out(h.grid(), nb);
  if (n < 2) return out;
  for (std::size_t j = 0; j < nb; ++j) {
    double tail = 0.0;  // sum of h^k, k = l+1 .. N-1
    for (std::size_t l = n - 1; l >= 1; --l) {
      out(l, j) = dt * (0.5 * h(l, j) + tail);
      tail += h(l, j);
    }
    out(0, j) = dt * tail;
  }
  return out;
}

inline SpaceTimeField ones_like(const SpaceTimeField& f) { return SpaceTimeField(f.grid(), f.boundary_nodes(), 1.0); }

/// K f = J measure(f) - R measure(R J f). Exactly two device calls.
inline SpaceTimeField apply_K(MeasurementDevice& device, const SpaceTimeField& f) {
  SpaceTimeField direct = op_J(device.measure(f));
  const SpaceTimeField reversed = op_R(device.measure(op_R(op_J(f))));
  direct -= reversed;
  return direct;
}

}  // namespace bcm

#endif  // BCM_CONTROL_HPP
