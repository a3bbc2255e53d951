#include <catch_amalgamated.hpp>

#include <cmath>

#include "bcm/reconstruct.hpp"

using namespace bcm;
using Catch::Approx;

namespace {

GeometricVolumeOracle interval_oracle(SpeedModel model = ConstantSpeed{1.0}, double res = 400.0) {
  return GeometricVolumeOracle(make_speed(DomainSpec::interval(1.0, res), std::move(model)), 1.0);
}

}  // namespace

TEST_CASE("oracle caches repeated queries") {
  const auto oracle = interval_oracle();
  CHECK(oracle.m_infinity() == Approx(1.0));
  CHECK(oracle({0.3, 0.4}) == Approx(0.7).margin(0.005));
  CHECK(oracle({0.3, 0.4}) == oracle({0.3, 0.4}));
  CHECK(oracle.evaluations() == 2);
  CHECK(oracle.cache_hits() == 2);
  CHECK_THROWS_AS(oracle({0.3}), ShapeError);
  CHECK(std::string(oracle.backend()) == "geometric");
}

TEST_CASE("membership in the closure of Q") {
  const auto oracle = interval_oracle();
  const double eps = oracle.default_eps(), margin = oracle.default_margin();
  CHECK(member_Qbar(oracle, {0.4, 0.4}, eps, margin));
  CHECK_FALSE(member_Qbar(oracle, {0.6, 0.6}, eps, margin));
  for (std::size_t i = 0; i < oracle.table().grid().interior_size(); i += 37)
    CHECK(member_Qbar(oracle, oracle.table().profile_at(i), eps, margin));
  CHECK_THROWS_AS(member_Qbar(oracle, {0.4, 0.4}, 0.0, margin), DomainError);
}

TEST_CASE("ascent on the interval") {
  const auto oracle = interval_oracle();
  AscentOptions opt;
  opt.order = {0, 1};
  const auto e = ascend_to_maximal(oracle, {0.2, 0.2}, opt);
  CHECK(e.converged);
  CHECK(e.tau[0] == Approx(0.8).margin(0.005));
  CHECK(e.tau[1] == Approx(0.2).margin(0.005));
  REQUIRE(e.certificate);
  for (bool b : *e.certificate) CHECK(b);
  CHECK(e.margin > 0.0);

  // already maximal: unchanged
  const auto same = ascend_to_maximal(oracle, {0.5, 0.5}, opt);
  CHECK(sup_distance(same.tau, {0.5, 0.5}) <= 0.005);
  const auto flipped = ascend_to_maximal(oracle, {0.5, 0.5}, {.order = {1, 0}});
  CHECK(sup_distance(flipped.tau, {0.5, 0.5}) <= 0.005);

  const BoundaryProfile r = oracle.table().profile_at(120);
  CHECK(sup_distance(ascend_to_maximal(oracle, r).tau, r) <= 0.005);

  CHECK_THROWS_AS(ascend_to_maximal(oracle, {0.7, 0.7}), PreconditionError);
  CHECK_THROWS_AS(ascend_to_maximal(oracle, {0.1, 0.1}, {.order = {0, 2}}), ConfigurationError);
}

TEST_CASE("ray limits bracket to the step tolerance") {
  const auto oracle = interval_oracle();
  AscentOptions opt;
  opt.step_tol = 1e-4;
  const auto lim = ray_limit(oracle, {0.0, 0.3}, 0, opt.resolved(oracle));
  CHECK(lim.bracket <= 0.5e-4);
  CHECK(lim.value == Approx(0.7).margin(0.005));
}

TEST_CASE("maximal elements of the interval") {
  const auto oracle = interval_oracle();
  std::vector<BoundaryProfile> seeds;
  for (int k = 1; k <= 9; ++k) seeds.push_back({0.1 * k, 0.0});
  const auto elements = extract_RM(oracle, seeds, {}, 0.02, 2);
  REQUIRE(elements.size() == 9);
  for (std::size_t k = 0; k < 9; ++k) {
    CHECK(elements[k].tau[0] == Approx(0.1 * double(k + 1)).margin(0.005));
    CHECK(elements[k].tau[1] == Approx(1.0 - 0.1 * double(k + 1)).margin(0.005));
  }
  CHECK(travel_time_diameter_1d(elements) == Approx(1.0).epsilon(0.02));

  const auto dup = extract_RM(oracle, {{0.3, 0.0}, {0.3, 0.0}, {0.3, 0.0}}, {}, 0.02);
  CHECK(dup.size() == 1);
}

TEST_CASE("travel-time diameter") {
  std::vector<SemilatticeElement> exact;
  for (double a : {0.2, 0.5, 0.9}) exact.push_back({.tau = {a, 1.0 - a}});
  CHECK(travel_time_diameter_1d(exact) == Approx(1.0));
  CHECK_THROWS_AS(travel_time_diameter_1d({}), DomainError);

  const auto oracle = interval_oracle(LinearSpeed{1.0, 1.0});
  const auto seeds = interval_seeds(oracle, 9, {});
  REQUIRE(seeds.size() == 9);
  CHECK(seeds.back()[0] < std::log(2.0));
  const auto elements = extract_RM(oracle, seeds, {}, 0.01);
  CHECK(travel_time_diameter_1d(elements) == Approx(std::log(2.0)).epsilon(0.02));
}

TEST_CASE("maximal elements on the disk are distance functions") {
  const SpeedField c = make_speed(DomainSpec::disk(1.0, 40.0, 32), ConstantSpeed{1.0});
  const GeometricVolumeOracle oracle(c, 2.0);
  AscentOptions opt;
  opt.step_tol = 2e-3;
  const auto e = ascend_to_maximal(oracle, BoundaryProfile::constant(32, 0.3), opt);
  CHECK(e.converged);
  const auto near = nearest_distance_function(oracle.table(), e.tau);
  const Point x = c.grid().nodes[near.node];
  CHECK(std::hypot(x.x, x.y) == Approx(0.7).margin(0.05));
  const BoundaryProfile r = boundary_distance_function(c, x);
  CHECK(sup_distance(r, e.tau) <= 0.02 * 2.0);
}

TEST_CASE("PDE oracle on the interval") {
  const SpeedField c = make_speed(DomainSpec::interval(1.0, 100.0), ConstantSpeed{1.0});
  MeasurementDevice device(c, SolverSettings::for_speed(c, 1.0));
  PdeOracleOptions po;
  po.extrapolate = true;
  const PdeVolumeOracle oracle(device, po);
  CHECK(std::string(oracle.backend()) == "pde");
  CHECK(oracle.m_infinity() == Approx(1.0).epsilon(0.03));
  CHECK(oracle({0.3, 0.4}) == Approx(0.7).epsilon(0.05));
  const auto count = oracle.measurements();
  oracle({0.3, 0.4});
  CHECK(oracle.measurements() == count);

  const auto elements = extract_RM(oracle, interval_seeds(oracle, 3, {}), {}, 0.02);
  CHECK(travel_time_diameter_1d(elements) == Approx(1.0).epsilon(0.05));
}
