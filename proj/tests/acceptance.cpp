// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "bcm/checks.hpp"
#include "bcm/config.hpp"
#include "bcm/experiment.hpp"
#include "bcm/reconstruct.hpp"

using namespace bcm;

namespace {

int failures = 0;

void report(int id, bool ok, const std::string& detail) {
  std::printf("%s criterion %d: %s\n", ok ? "PASS" : "FAIL", id, detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

SpeedField interval(double res, SpeedModel model) { return make_speed(DomainSpec::interval(1.0, res), std::move(model)); }

const SineSpeed kSmooth{1.0, 0.2, 2.0};  // c in [0.8, 1.2]

// ---------------------------------------------------------------------------

// The discrete identity holds to rounding on every grid; its error against
// the continuum is measured with interior products from a grid 8x finer.
void criterion1() {
  constexpr int pairs = 10;
  const SpeedField c200 = interval(200, kSmooth), c400 = interval(400, kSmooth), cref = interval(3200, kSmooth);
  MeasurementDevice d200(c200, SolverSettings::for_speed(c200, 1.0));
  MeasurementDevice d400(c400, SolverSettings::for_speed(c400, 1.0));
  const MeasurementDevice dref(cref, SolverSettings::for_speed(cref, 1.0));

  double discrete = 0.0, err200 = 0.0, err400 = 0.0;
  for (int p = 0; p < pairs; ++p) {
    auto sources = [&](const MeasurementDevice& d) {
      std::mt19937_64 rng(1000 + p);
      SpaceTimeField f = band_limited_source(d.time_grid(), 2, rng);
      SpaceTimeField h = band_limited_source(d.time_grid(), 2, rng);
      return std::pair{f, h};
    };
    const auto [fr, hr] = sources(dref);
    const InteriorField uf = verification_snapshot(dref, fr), uh = verification_snapshot(dref, hr);
    const double reference = natural_inner(cref, uf, uh);
    const double scale = std::sqrt(natural_inner(cref, uf, uf) * natural_inner(cref, uh, uh));

    auto boundary = [&](MeasurementDevice& d) {
      const auto [f, h] = sources(d);
      return inner(f, apply_K(d, h), InnerProductWeights::make(d));
    };
    err200 = std::max(err200, std::abs(boundary(d200) - reference) / scale);
    const double b400 = boundary(d400);
    err400 = std::max(err400, std::abs(b400 - reference) / scale);

    const auto [f, h] = sources(d400);
    const InteriorField vf = verification_snapshot(d400, f), vh = verification_snapshot(d400, h);
    discrete = std::max(discrete, std::abs(b400 - natural_inner(c400, vf, vh)) /
                                      std::sqrt(natural_inner(c400, vf, vf) * natural_inner(c400, vh, vh)));
  }
  report(1, err400 <= 0.02 && err400 < err200 && discrete <= 0.02,
         fmt("Blagovestchenskii identity, c = 1 + 0.2 sin(2 pi x), %d pairs: discrete error %.2e at h = 1/400; "
             "error vs h/8 reference %.3e (h = 1/200) -> %.3e (h = 1/400), tol 2%%",
             pairs, discrete, err200, err400));
}

void criterion2() {
  const SpeedField c = interval(400, kSmooth);
  const MeasurementDevice device(c, SolverSettings::for_speed(c, 1.0));
  double worst = 0.0;
  for (const auto& s : cross_term_samples(device, 10, 2024)) worst = std::max(worst, s.error);
  report(2, worst <= 0.02, fmt("cross term (If, 1) vs (u(T), 1): max relative error %.3e over 10 sources, tol 2%%", worst));
}

void criterion3() {
  const SpeedField c = interval(400, kSmooth);
  const auto s = SolverSettings::for_speed(c, 1.0);
  const auto weights = c.boundary_measure_weights();
  AdjointDefect d = adjoint_defect(s.time_grid(), weights, 50, 7);
  const SpeedField r = make_speed(DomainSpec::rectangle(1.0, 1.0, 20.0), ConstantSpeed{1.0});
  const AdjointDefect d2 = adjoint_defect(TimeGrid{0.01, 73}, r.boundary_measure_weights(), 20, 8);
  const double worst = std::max(d.relative, d2.relative);
  const bool ok = worst <= 1e-12 && d.reversal_exact && d2.reversal_exact;
  report(3, ok, fmt("(If, h) = (f, I+h): max relative defect %.2e (tol 1e-12); R(R f) == f bit-exact: %s", worst,
                    d.reversal_exact && d2.reversal_exact ? "yes" : "no"));
}

void criterion4() {
  const SpeedField c = interval(200, kSmooth);
  MeasurementDevice device(c, SolverSettings::for_speed(c, 1.0));
  const SupportMask mask(device.time_grid(), BoundarySubset::all(2), BoundaryProfile{0.3, 0.4});
  const auto w = InnerProductWeights::make(device);
  const double alpha = 1e-2;
  const double k_norm = estimate_K_norm(device, mask, 30);

  std::mt19937_64 rng(44);
  std::normal_distribution<double> normal;
  double lowest = INFINITY;
  for (int i = 0; i < 20; ++i) {
    SpaceTimeField v(device.time_grid(), 2);
    for (double& x : v.values()) x = normal(rng);
    v = mask.apply(std::move(v));
    lowest = std::min(lowest, inner(v, apply_normal_operator(device, mask, alpha, v), w) / inner(v, v, w));
  }
  const bool rayleigh_ok = lowest >= alpha - 1e-3 * k_norm;

  const CgOptions opt{1e-8, 5000};
  const CgResult cold = solve_normal_equation(device, mask, alpha, opt);
  SpaceTimeField start(device.time_grid(), 2);
  for (double& x : start.values()) x = normal(rng);
  const CgResult warm = solve_normal_equation(device, mask, alpha, opt, &start);
  const double agree = norm(cold.f - warm.f, w) / norm(cold.f, w);
  const bool counts = cold.measurements == 2u * static_cast<unsigned>(cold.iterations) &&
                      warm.measurements == 2u * static_cast<unsigned>(warm.iterations) + 2u;
  const bool ok = rayleigh_ok && cold.converged && warm.converged && agree <= 1e-7 && counts;
  report(4, ok,
         fmt("min Rayleigh quotient %.4e >= alpha - 1e-3 ||K|| = %.4e (||K|| ~ %.3f); CG residuals %.1e / %.1e in %d / %d "
             "iterations; starts agree to %.1e; measurements %llu = 2 x %d (+2 for the initial residual: %llu)",
             lowest, alpha - 1e-3 * k_norm, k_norm, cold.residual, warm.residual, cold.iterations, warm.iterations, agree,
             static_cast<unsigned long long>(cold.measurements), cold.iterations,
             static_cast<unsigned long long>(warm.measurements)));
}

// (f, K f) at alpha carries a bias of about -3 sqrt(alpha) from the smoothing
// layer at the edge of the influence domain; the extrapolated value removes it.
void criterion5() {
  const std::vector<double> schedule = geometric_schedule();
  const auto all = BoundarySubset::all(2);
  const BoundaryProfile tau{0.3, 0.4};

  const SpeedField one = interval(400, ConstantSpeed{1.0});
  MeasurementDevice d1(one, SolverSettings::for_speed(one, 1.0));
  const MinimizeReport r1 = alpha_continuation(d1, SupportMask(d1.time_grid(), all, tau), schedule);
  const double oracle1 = domain_of_influence(one, all, tau).volume_closed;
  const double literal1 = r1.final_volume(), extrap1 = *sqrt_alpha_extrapolation(r1);
  const double e_first = snapshot_indicator_error(d1, r1.records.front().f, all, tau);
  const double e_last = snapshot_indicator_error(d1, r1.records.back().f, all, tau);

  const SpeedField var = interval(400, SineSpeed{1.0, 0.2, 1.0});
  MeasurementDevice d2(var, SolverSettings::for_speed(var, 1.0));
  const MinimizeReport r2 = alpha_continuation(d2, SupportMask(d2.time_grid(), all, tau), schedule);
  const double oracle2 = domain_of_influence(var, all, tau).volume_closed;
  const double extrap2 = *sqrt_alpha_extrapolation(r2);

  const double rel1 = std::abs(extrap1 - oracle1) / oracle1, rel2 = std::abs(extrap2 - oracle2) / oracle2;
  const bool ok = rel1 <= 0.03 && e_last < e_first && rel2 <= 0.05;
  report(5, ok,
         fmt("c = 1: volume %.4f at alpha = 1e-4 (%.1f%% below oracle %.4f), sqrt(alpha)-extrapolated %.4f (%.2f%%, tol 3%%); "
             "interior L2 error %.4f (alpha = 1e-1) -> %.4f (alpha = 1e-4); c = 1 + 0.2 sin(pi x): extrapolated %.4f vs "
             "oracle %.4f (%.2f%%, tol 5%%, alpha = 1e-4 value %.4f)",
             literal1, 100.0 * (oracle1 - literal1) / oracle1, oracle1, extrap1, 100.0 * rel1, e_first, e_last, extrap2,
             oracle2, 100.0 * rel2, r2.final_volume()));
}

void criterion6() {
  const SpeedField c = interval(400, kSmooth);
  const MeasurementDevice d(c, SolverSettings::for_speed(c, 1.0));
  double worst = 0.0;
  for (const BoundaryProfile& tau : {BoundaryProfile{0.3, 0.4}, BoundaryProfile{0.6, 0.1}, BoundaryProfile{0.2, 0.0}})
    for (std::uint64_t seed : {1u, 2u})
      worst = std::max(worst, finite_speed_leak(d, BoundarySubset::all(2), tau, 2.0 * c.grid().h() / c.min(), seed));

  const SpeedField r = make_speed(DomainSpec::rectangle(1.0, 1.0, 40.0), BumpSpeed{1.0, 0.3, {0.5, 0.5}, 0.2});
  const MeasurementDevice dr(r, SolverSettings::for_speed(r, 0.5));
  std::vector<std::size_t> bottom;
  for (std::size_t j = 0; j < 40; ++j) bottom.push_back(j);
  const auto gamma = BoundarySubset::of(bottom, r.grid().boundary_size());
  worst = std::max(worst, finite_speed_leak(dr, gamma, BoundaryProfile::constant(r.grid().boundary_size(), 0.3),
                                            2.0 * r.grid().h() / r.min(), 3));
  report(6, worst <= 1e-6,
         fmt("snapshot mass outside M(Gamma, tau) dilated by 2h: max share %.2e over 7 slab sources (1-D and 2-D), "
             "tol 1e-6",
             worst));
}

// Points where d(y, x) = tau(y) on the interval, for the shell constant sum 1/c(x_p).
double interval_shell_constant(const SpeedField& fine, const BoundaryProfile& tau) {
  const auto cum = cumulative_travel_time_1d(fine);
  const double total = cum.back();
  const Grid& g = fine.grid();
  double constant = 0.0;
  auto crossing = [&](double target) {
    for (std::size_t i = 0; i + 1 < cum.size(); ++i)
      if (cum[i] <= target && target < cum[i + 1]) {
        const double x = g.nodes[i].x + (target - cum[i]) / (cum[i + 1] - cum[i]) * g.hx;
        return 1.0 / fine.at({x, 0.0});
      }
    return 0.0;
  };
  constant += crossing(tau[0]);
  constant += crossing(total - tau[1]);
  return constant;
}

void criterion7() {
  // shell and closed/open gap, interval and disk
  const BoundaryProfile tau{0.3, 0.4};
  const auto all2 = BoundarySubset::all(2);
  const double c1 = interval_shell_constant(interval(6400, kSmooth), tau);
  bool shell_ok = true;
  std::string shell_text;
  double previous = 0.0;
  for (double res : {100.0, 200.0, 400.0}) {
    const SpeedField c = interval(res, kSmooth);
    const DistanceTable table(c);
    const double h = c.grid().h();
    // a 1-D shell holds two or three nodes per crossing; averaging over
    // sub-cell shifts of tau removes that lattice aliasing from the rate
    double shell = 0.0, gap = 0.0;
    bool gap_ok = true;
    for (int k = 0; k < 10; ++k) {
      const double shift = 0.01 * k / 10.0;
      const auto m = domain_of_influence(c, table, all2, BoundaryProfile{tau[0] + shift, tau[1] + shift});
      const double s = shell_volume(c, m.r, h);
      const double g = m.volume_closed - m.volume_open;
      gap_ok = gap_ok && g <= s + 1e-15;
      shell += s / 10.0;
      gap = std::max(gap, g);
    }
    shell_ok = shell_ok && gap_ok && shell <= 1.5 * 2.0 * h * c1;
    if (previous > 0.0) shell_ok = shell_ok && shell / previous >= 0.35 && shell / previous <= 0.65;
    shell_text += fmt(" h=1/%g: gap %.2e, shell %.2e (2hC %.2e);", res, gap, shell, 2.0 * h * c1);
    previous = shell;
  }
  const double c2 = 2.0 * std::numbers::pi * 0.75;
  previous = 0.0;
  for (double res : {50.0, 100.0}) {
    const SpeedField c = make_speed(DomainSpec::disk(1.0, res, 128), ConstantSpeed{1.0});
    const auto m = domain_of_influence(c, BoundarySubset::all(128), BoundaryProfile::constant(128, 0.25));
    const double h = c.grid().h();
    const double shell = shell_volume(c, m.r, h);
    const double gap = m.volume_closed - m.volume_open;
    shell_ok = shell_ok && gap <= shell + 1e-15 && shell <= 1.5 * 2.0 * h * c2;
    if (previous > 0.0) shell_ok = shell_ok && shell / previous >= 0.35 && shell / previous <= 0.65;
    shell_text += fmt(" disk h=1/%g: gap %.2e, shell %.2e (2hC %.2e);", res, gap, shell, 2.0 * h * c2);
    previous = shell;
  }

  // monotonicity of the volume under the meet
  const SpeedField disk = make_speed(DomainSpec::disk(1.0, 50.0, 32), LinearSpeed{1.0, 0.2, 0.1});
  const GeometricVolumeOracle oracle(disk, 2.0);
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(0.0, 1.2);
  int violations = 0;
  for (int p = 0; p < 50; ++p) {
    BoundaryProfile a(32), b(32);
    for (std::size_t j = 0; j < 32; ++j) {
      a[j] = u(rng);
      b[j] = u(rng);
    }
    if (oracle(meet(a, b)) > std::min(oracle(a), oracle(b))) ++violations;
  }

  // eikonal distances on the disk against straight rays
  const SpeedField fine = make_speed(DomainSpec::disk(1.0, 200.0, 16), ConstantSpeed{1.0});
  const DistanceTable table(fine);
  double worst = 0.0;
  for (std::size_t j = 0; j < 16; ++j)
    for (std::size_t i = 0; i < fine.grid().interior_size(); ++i) {
      const double exact = distance(fine.grid().boundary_nodes[j], fine.grid().nodes[i]);
      if (exact >= 0.05) worst = std::max(worst, std::abs(table(j, i) - exact) / exact);
    }

  const SpeedField ann = make_speed(DomainSpec::disk(1.0, 200.0, 256), ConstantSpeed{1.0});
  const double annulus = domain_of_influence(ann, BoundarySubset::all(256), BoundaryProfile::constant(256, 0.25)).volume_closed;
  const double exact = std::numbers::pi * 0.4375;
  const double ann_err = std::abs(annulus - exact) / exact;

  const bool ok = shell_ok && violations == 0 && worst <= 0.01 && ann_err <= 0.02;
  report(7, ok,
         fmt("closed/open gap within the shell and shell halving:%s meet monotonicity violations %d/50; disk eikonal max "
             "relative error %.3f%% at h = 1/200 (tol 1%%); annulus volume %.4f vs %.4f (%.2f%%, tol 2%%)",
             shell_text.c_str(), violations, 100.0 * worst, annulus, exact, 100.0 * ann_err));
}

struct Recovery {
  double worst = 0.0;  // max |r(0) + r(1) - D| / D
  bool certified = true;
  std::size_t count = 0;
};

Recovery interval_recovery(const VolumeOracle& oracle, double D, std::size_t seeds) {
  const AscentOptions opt;
  const auto elements = extract_RM(oracle, interval_seeds(oracle, seeds, opt), opt, 1e-2);
  Recovery r;
  r.count = elements.size();
  for (const auto& e : elements) {
    r.worst = std::max(r.worst, std::abs(e.tau[0] + e.tau[1] - D) / D);
    r.certified = r.certified && e.converged && e.certificate &&
                  std::all_of(e.certificate->begin(), e.certificate->end(), [](bool b) { return b; });
  }
  return r;
}

void criterion8() {
  const GeometricVolumeOracle g1(interval(400, ConstantSpeed{1.0}), 1.0);
  const Recovery a = interval_recovery(g1, 1.0, 9);
  const SpeedField lin = interval(400, LinearSpeed{1.0, 1.0});
  const GeometricVolumeOracle g2(lin, 1.0);
  const Recovery b = interval_recovery(g2, std::log(2.0), 9);

  const SpeedField pc = interval(100, ConstantSpeed{1.0});
  MeasurementDevice device(pc, SolverSettings::for_speed(pc, 1.0));
  PdeOracleOptions po;
  po.extrapolate = true;
  const PdeVolumeOracle pde(device, po);
  const Recovery p = interval_recovery(pde, 1.0, 9);

  const SpeedField disk = make_speed(DomainSpec::disk(1.0, 50.0, 64), ConstantSpeed{1.0});
  const GeometricVolumeOracle gd(disk, 2.0);
  AscentOptions dopt;
  dopt.step_tol = 2e-3;
  const SemilatticeElement e = ascend_to_maximal(gd, BoundaryProfile::constant(64, 0.3), dopt);
  const auto nearest = nearest_distance_function(gd.table(), e.tau);
  const Point x = disk.grid().nodes[nearest.node];
  const BoundaryProfile rx = boundary_distance_function(disk, x);
  double scale = 0.0;
  for (double v : rx) scale = std::max(scale, v);
  const double disk_err = sup_distance(rx, e.tau) / scale;
  const bool disk_cert = e.converged && e.certificate &&
                         std::all_of(e.certificate->begin(), e.certificate->end(), [](bool v) { return v; });

  const bool ok = a.count == 9 && b.count == 9 && a.worst <= 0.02 && b.worst <= 0.02 && p.worst <= 0.05 &&
                  disk_err <= 0.02 && a.certified && b.certified && p.certified && disk_cert;
  report(8, ok,
         fmt("c = 1: %zu elements, max |r0 + r1 - 1| %.2f%%; c = 1 + x: %zu elements, max |r0 + r1 - ln 2| / ln 2 %.2f%% "
             "(tol 2%%); PDE oracle c = 1: %zu elements, %.2f%% (tol 5%%, %llu measurements); disk: element within "
             "%.2f%% sup-norm of r_x, |x| = %.3f (tol 2%%); maximality certificates %s",
             a.count, 100.0 * a.worst, b.count, 100.0 * b.worst, p.count, 100.0 * p.worst,
             static_cast<unsigned long long>(device.count()), 100.0 * disk_err, std::hypot(x.x, x.y),
             a.certified && b.certified && p.certified && disk_cert ? "all hold" : "FAILED"));
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void criterion9() {
  const auto root = std::filesystem::temp_directory_path() / "bcm_acceptance_determinism";
  std::filesystem::remove_all(root);
  bool same = true;
  for (const char* noise : {"0", "0.02"}) {
    std::string texts[2];
    for (int run = 0; run < 2; ++run) {
      ExperimentConfig cfg = parse_config(std::string("[domain]\nresolution = 100\n[tau]\nkind = list\nvalues = 0.3 0.4\n"
                                                      "[minimize]\nextrapolate = sqrt_alpha\n[noise]\nlevel = ") +
                                          noise + "\n");
      cfg.out_dir = root / ("run" + std::to_string(run));
      cfg.seed = 17;
      cfg.noise.seed = 17;
      cfg.jobs = 1;
      cmd_volume(cfg);
      texts[run] = slurp(cfg.out_dir / "report.json");
    }
    same = same && !texts[0].empty() && texts[0] == texts[1];
  }
  std::filesystem::remove_all(root);
  report(9, same, fmt("repeated volume runs (clean and 2%% noise, seed 17, single-threaded) give byte-identical report.json: %s",
                      same ? "yes" : "no"));
}

}  // namespace

int main() {
  const auto t0 = std::chrono::steady_clock::now();
  criterion1();
  criterion2();
  criterion3();
  criterion4();
  criterion5();
  criterion6();
  criterion7();
  criterion8();
  criterion9();
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::printf("%d of 9 criteria failed (%.1f s)\n", failures, secs);
  return failures == 0 ? 0 : 1;
}
