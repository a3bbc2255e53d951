#ifndef BCM_ERRORS_HPP
#define BCM_ERRORS_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace bcm {

/// Invalid user input: grids, speeds, solver settings, config files.
class ConfigurationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A point or argument outside the domain of an operation.
class DomainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Fields defined on incompatible grids.
class ShapeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InstabilityError : public std::runtime_error {
 public:
  InstabilityError(std::size_t step, const std::string& what)
      : std::runtime_error(what + " (time step " + std::to_string(step) + ")"), step_(step) {}
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

/// Replay backend has no stored trace for a source.
class ReplayError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// CG met a direction with non-positive curvature.
class CurvatureError : public std::runtime_error {
 public:
  CurvatureError(double rayleigh, int iteration)
      : std::runtime_error("non-positive curvature in CG at iteration " + std::to_string(iteration) +
                           ", Rayleigh quotient " + std::to_string(rayleigh)),
        rayleigh_(rayleigh),
        iteration_(iteration) {}
  double rayleigh_quotient() const noexcept { return rayleigh_; }
  int iteration() const noexcept { return iteration_; }

 private:
  double rayleigh_;
  int iteration_;
};

class PreconditionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Volume oracle answers that contradict the lattice order.
class OracleInconsistency : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace bcm

#endif  // BCM_ERRORS_HPP
