#include <catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "bcm/config.hpp"
#include "bcm/experiment.hpp"

using namespace bcm;
using Catch::Approx;

namespace {

std::filesystem::path scratch(const char* name) {
  auto dir = std::filesystem::temp_directory_path() / ("bcm_config_" + std::string(name));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("defaults") {
  const ExperimentConfig cfg = parse_config("");
  CHECK(cfg.domain.shape == Shape::interval);
  CHECK(cfg.T == 1.0);
  CHECK(cfg.alphas == geometric_schedule());
  CHECK(cfg.oracle == "geometric");
  CHECK_FALSE(cfg.gamma_nodes);
  CHECK(cfg.tol.blagovestchenskii == 0.02);
}

TEST_CASE("full config") {
  const ExperimentConfig cfg = parse_config(R"(
[domain]
shape = disk
radius = 2
resolution = 30
boundary_resolution = 48
[speed]
profile = smooth-bump
c0 = 1.5
amplitude = 0.2
center_x = 0.1
center_y = -0.2
width = 0.3
[time]
T = 2.5
cfl = 0.5
[gamma]
nodes = 3, 1, 2
[tau]
kind = list
values = 0.1 0.2 0.3
[minimize]
alphas = 1e-2 1e-3
tol = 1e-9
max_iters = 300
warm_start = off
extrapolate = sqrt_alpha
[noise]
level = 0.05
seed = 12
[oracle]
backend = pde
eps = 0.01
margin = 0.002
horizon = 2
[reconstruct]
seeds = list
profiles = 0.1 0.2; 0.3 0.4
step_tol = 1e-4
order = 1 0
[verify]
pairs = 3
symmetry_tol = 1e-6
)");
  CHECK(cfg.domain.shape == Shape::disk);
  CHECK(cfg.domain.boundary_resolution == 48);
  const auto& bump = std::get<BumpSpeed>(cfg.speed);
  CHECK(bump.c0 == 1.5);
  CHECK(bump.center.y == -0.2);
  CHECK(cfg.T == 2.5);
  CHECK(cfg.cfl == 0.5);
  CHECK(*cfg.gamma_nodes == std::vector<std::size_t>{3, 1, 2});
  CHECK(cfg.tau_values == std::vector<double>{0.1, 0.2, 0.3});
  CHECK(cfg.alphas == std::vector<double>{1e-2, 1e-3});
  CHECK(cfg.cg.max_iters == 300);
  CHECK_FALSE(cfg.warm_start);
  CHECK(cfg.extrapolate);
  CHECK(cfg.noise.seed == 12);
  CHECK(cfg.oracle == "pde");
  CHECK(*cfg.oracle_horizon == 2.0);
  REQUIRE(cfg.seed_lists.size() == 2);
  CHECK(cfg.seed_lists[1] == std::vector<double>{0.3, 0.4});
  CHECK(cfg.ascent.order == std::vector<std::size_t>{1, 0});
  CHECK(cfg.pairs == 3);
  CHECK(cfg.tol.symmetry == 1e-6);
  CHECK(cfg.echo.at("time").at("T") == "2.5");
}

TEST_CASE("malformed configs are configuration errors") {
  CHECK_THROWS_AS(parse_config("[domian]\nshape = interval\n"), ConfigurationError);
  CHECK_THROWS_AS(parse_config("[domain]\nresolutoin = 10\n"), ConfigurationError);
  CHECK_THROWS_AS(parse_config("[domain]\nshape = torus\n"), ConfigurationError);
  CHECK_THROWS_AS(parse_config("[domain]\nresolution = many\n"), ConfigurationError);
  CHECK_THROWS_AS(parse_config("[time]\nT = -1\n"), ConfigurationError);
  CHECK_THROWS_AS(parse_config("[minimize]\nalphas = 1e-3 1e-2\n"), ConfigurationError);
  CHECK_THROWS_AS(parse_config("[minimize]\nextrapolate = cubic\n"), ConfigurationError);
  CHECK_THROWS_AS(parse_config("[noise]\nlevel = -0.1\n"), ConfigurationError);
  CHECK_THROWS_AS(parse_config("[oracle]\nbackend = magic\n"), ConfigurationError);
  CHECK_THROWS_AS(parse_config("[tau]\nkind = list\n"), ConfigurationError);
  CHECK_THROWS_AS(parse_config("[gamma]\nnodes = 0.5\n"), ConfigurationError);
  CHECK_THROWS_AS(parse_config("[speed]\nprofile = sampled\nfile = nope.csv\n"), ConfigurationError);
  CHECK_THROWS_AS(parse_config("[output]\nreplay_dir = /nonexistent/traces\n"), ConfigurationError);
  CHECK_THROWS_AS(parse_config("[domain\nshape = interval\n"), ConfigurationError);
  CHECK_THROWS_AS(load_config("/nonexistent/run.ini"), ConfigurationError);
}

TEST_CASE("CFL above 0.9 is rejected") {
  const ExperimentConfig cfg = parse_config("[domain]\nresolution = 100\n[time]\ncfl = 1.2\n");
  const SpeedField c = build_speed(cfg);
  CHECK_THROWS_AS(build_settings(cfg, c), ConfigurationError);
  const ExperimentConfig dt = parse_config("[domain]\nresolution = 100\n[speed]\nc0 = 2\n[time]\ndt = 0.006\n");
  CHECK_THROWS_AS(build_settings(dt, build_speed(dt)), ConfigurationError);
  CHECK_THROWS_AS(cmd_forward(cfg), ConfigurationError);
}

TEST_CASE("tau and gamma construction") {
  const ExperimentConfig one = parse_config("[tau]\nkind = list\nvalues = 0.5\n");
  CHECK(build_tau(one, 4) == BoundaryProfile::constant(4, 0.5));
  const ExperimentConfig two = parse_config("[tau]\nkind = list\nvalues = 0.5 0.2\n");
  CHECK_THROWS_AS(build_tau(two, 3), ConfigurationError);
  const ExperimentConfig g = parse_config("[gamma]\nnodes = 5\n");
  CHECK_THROWS_AS(build_gamma(g, 2), ConfigurationError);
}

TEST_CASE("relative paths resolve against the config file") {
  const auto dir = scratch("paths");
  const ExperimentConfig probe = parse_config("[domain]\nresolution = 4\n");
  const std::size_t n = build_grids(probe.domain).interior_size();
  {
    std::ofstream speed(dir / "speed.csv");
    for (std::size_t i = 0; i < n; ++i) speed << i << ',' << 1.0 + 0.1 * static_cast<double>(i) << '\n';
    std::ofstream tau(dir / "tau.csv");
    tau << "0,0.25\n1,0.5\n";
    std::ofstream ini(dir / "run.ini");
    ini << "[domain]\nresolution = 4\n[speed]\nprofile = sampled\nfile = speed.csv\n"
           "[tau]\nkind = file\nfile = tau.csv\n[output]\ndir = results\n";
  }
  const ExperimentConfig cfg = load_config(dir / "run.ini");
  CHECK(cfg.out_dir == dir / "results");
  const SpeedField c = build_speed(cfg);
  CHECK(c.max() == Approx(1.4));
  CHECK(build_tau(cfg, 2) == BoundaryProfile{0.25, 0.5});
  std::filesystem::remove_all(dir);
}

TEST_CASE("forward command writes its outputs") {
  const auto dir = scratch("forward");
  ExperimentConfig cfg = parse_config("[domain]\nresolution = 50\n[forward]\nsource = zero\n");
  cfg.out_dir = dir;
  const CommandResult r = run_command("forward", cfg);
  CHECK(r.exit_code == kSuccess);
  CHECK(r.report["trace"]["max_abs"] == 0.0);
  CHECK(r.report["measurements"] == 1);
  for (const char* f : {"report.json", "timings.json", "trace.csv", "grid.csv", "snapshot.csv"})
    CHECK(std::filesystem::exists(dir / f));
  CHECK_THROWS_AS(run_command("frobnicate", cfg), ConfigurationError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("volume command matches the geometric volume") {
  const auto dir = scratch("volume");
  ExperimentConfig cfg = parse_config("[domain]\nresolution = 100\n[tau]\nkind = list\nvalues = 0.3 0.4\n"
                                      "[minimize]\nextrapolate = sqrt_alpha\n");
  cfg.out_dir = dir;
  const CommandResult r = cmd_volume(cfg);
  CHECK(r.report["volume"]["geometric"].get<double>() == Approx(0.7).margin(0.011));
  CHECK(r.report["volume"]["pde"].get<double>() == Approx(0.7).epsilon(0.05));
  CHECK(r.report["minimize"]["alpha"].size() == 4);
  CHECK(r.report["minimize"].contains("interior_l2_error"));

  ExperimentConfig zero = parse_config("[domain]\nresolution = 100\n[tau]\nvalue = 0\n");
  zero.out_dir = dir;
  const CommandResult z = cmd_volume(zero);
  CHECK(z.report["volume"]["pde"] == 0.0);
  CHECK(z.report["volume"]["geometric"] == 0.0);
  std::filesystem::remove_all(dir);
}

TEST_CASE("reconstruct needs seeds and an oracle") {
  const auto dir = scratch("reconstruct");
  ExperimentConfig cfg = parse_config("[domain]\nresolution = 100\n[reconstruct]\nseeds = list\nprofiles =\n");
  cfg.out_dir = dir;
  CHECK_THROWS_AS(cmd_reconstruct(cfg), ConfigurationError);
  cfg = parse_config("[domain]\nresolution = 100\n[reconstruct]\nseeds = list\nprofiles = 0.9 0.9\n");
  cfg.out_dir = dir;
  CHECK_THROWS_AS(cmd_reconstruct(cfg), ConfigurationError);
  cfg = parse_config("[domain]\nresolution = 100\n[oracle]\nbackend = none\n");
  cfg.out_dir = dir;
  CHECK_THROWS_AS(cmd_reconstruct(cfg), ConfigurationError);

  cfg = parse_config("[domain]\nresolution = 200\n[reconstruct]\nseed_count = 5\n");
  cfg.out_dir = dir;
  const CommandResult r = cmd_reconstruct(cfg);
  CHECK(r.report["elements"].size() == 5);
  CHECK(r.report["diameter"]["recovered"].get<double>() == Approx(1.0).epsilon(0.02));
  for (const auto& e : r.report["elements"]) CHECK(e["maximality_certificate"] == true);
  std::filesystem::remove_all(dir);
}

TEST_CASE("verification-only commands refuse to run without the channel") {
  ExperimentConfig cfg = parse_config("[domain]\nresolution = 50\n");
  cfg.out_dir = scratch("noverify");
  cfg.verification = false;
  CHECK_THROWS_AS(cmd_verify(cfg), ConfigurationError);
  CHECK_THROWS_AS(cmd_blago_check(cfg), ConfigurationError);
  std::filesystem::remove_all(cfg.out_dir);
}

TEST_CASE("record then replay a forward run") {
  const auto dir = scratch("replay");
  ExperimentConfig rec = parse_config("[domain]\nresolution = 50\n");
  rec.out_dir = dir / "a";
  rec.record_dir = dir / "traces";
  const auto first = cmd_forward(rec);

  ExperimentConfig rep = parse_config("[domain]\nresolution = 50\n");
  rep.out_dir = dir / "b";
  rep.replay_dir = dir / "traces";
  const auto second = cmd_forward(rep);
  CHECK(first.report["trace"]["hash"] == second.report["trace"]["hash"]);
  CHECK_FALSE(second.report.contains("snapshot"));
  std::filesystem::remove_all(dir);
}
