// bcm: boundary-control experiments from a config file.
//
//   bcm <forward|volume|reconstruct|verify|blago-check> --config run.ini
//       [--out DIR] [--jobs N] [--seed N] [--verification on|off]
//
// Exit status: 0 success, 1 failed check or numerical breakdown, 2 configuration error.

#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "bcm/experiment.hpp"

namespace {

void print_summary(const std::string& command, const bcm::Json& r) {
  if (command == "forward") {
    std::cout << "trace max |u| = " << r["trace"]["max_abs"].dump() << ", " << r["measurements"].dump()
              << " measurement(s)\n";
  } else if (command == "volume") {
    std::cout << "volume (pde) = " << r["volume"]["pde"].dump();
    if (r["volume"].contains("geometric")) std::cout << ", geometric = " << r["volume"]["geometric"].dump();
    std::cout << ", " << r["measurements"].dump() << " measurements\n";
  } else if (command == "reconstruct") {
    std::cout << r["elements"].size() << " maximal element(s)";
    if (r.contains("diameter")) std::cout << ", diameter = " << r["diameter"]["recovered"].dump();
    std::cout << '\n';
  } else if (command == "verify") {
    for (const auto& c : r["checks"])
      std::cout << (c["passed"].get<bool>() ? "PASS " : "FAIL ") << c["name"].get<std::string>() << " "
                << c["value"].dump() << " (tol " << c["tolerance"].dump() << ")\n";
  } else if (command == "blago-check") {
    std::cout << (r["passed"].get<bool>() ? "PASS" : "FAIL") << " max relative error " << r["max_relative_error"].dump()
              << " (tol " << r["tolerance"].dump() << ")\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Boundary control method: volumes of influence domains and boundary distance functions"};
  std::string command, config_path, out_dir, verification = "on";
  unsigned jobs = 1;
  std::uint64_t seed = 0;
  app.add_option("command", command, "forward | volume | reconstruct | verify | blago-check")
      ->required()
      ->check(CLI::IsMember({"forward", "volume", "reconstruct", "verify", "blago-check"}));
  app.add_option("--config", config_path, "INI config file")->required();
  app.add_option("--out", out_dir, "output directory (overrides [output] dir)");
  auto* jobs_opt = app.add_option("--jobs", jobs, "worker threads for distance tables and seed ascents")
                       ->check(CLI::PositiveNumber);
  auto* seed_opt = app.add_option("--seed", seed, "seed for random sources and measurement noise");
  app.add_option("--verification", verification, "interior snapshot channel")->check(CLI::IsMember({"on", "off"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? bcm::kSuccess : bcm::kConfigError;
  }

  try {
    bcm::ExperimentConfig cfg = bcm::load_config(config_path);
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    if (*jobs_opt) cfg.jobs = jobs;
    if (*seed_opt) {
      cfg.seed = seed;
      cfg.noise.seed = seed;
    }
    cfg.verification = verification == "on";
    const bcm::CommandResult result = bcm::run_command(command, cfg);
    print_summary(command, result.report);
    std::cout << "report: " << (cfg.out_dir / "report.json").string() << '\n';
    return result.exit_code;
  } catch (const bcm::ConfigurationError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
  } catch (const bcm::ShapeError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
  } catch (const bcm::DomainError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
  } catch (const bcm::PreconditionError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
  } catch (const bcm::ReplayError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return bcm::kCheckFailure;
  }
  return bcm::kConfigError;
}
