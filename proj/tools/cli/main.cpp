// isde: command-line front end for the study harness.

#include <cstdint>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "isde/errors.hpp"
#include "isde/harness/config.hpp"
#include "isde/harness/studies.hpp"
#include "isde/harness/table.hpp"
#include "isde/version.hpp"

namespace {

using isde::harness::ExperimentConfig;
using isde::harness::StudyResult;
using Study = std::function<StudyResult(const ExperimentConfig&)>;

struct Args {
  std::string config;
  std::string out = ".";
  std::optional<std::uint64_t> seed;
};

int run_study(const std::string& name, const Study& study, const Args& args) {
  const ExperimentConfig config = isde::harness::load_config(args.config, args.seed);
  const StudyResult result = study(config);
  const auto paths = isde::harness::write_study(result, config, args.out);
  for (const auto& w : result.warnings) std::cerr << "warning: " << w << '\n';
  for (const auto& [label, slope] : result.slopes) {
    std::cout << label << " slope " << isde::harness::format_real(slope) << '\n';
  }
  for (const auto& p : paths) std::cout << "wrote " << p.string() << '\n';
  if (!result.passed) {
    std::cout << name << ": FAILED\n";
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Interpolating-SDE samplers: forward simulation, reverse solvers and studies"};
  app.set_version_flag("--version", std::string(isde::kVersion));
  app.require_subcommand(1);

  const std::map<std::string, std::pair<std::string, Study>> studies{
      {"simulate-forward",
       {"Sample the forward marginal and compare with its closed form",
        isde::harness::simulate_forward}},
      {"solve", {"Run each configured solver and write final states", isde::harness::solve_study}},
      {"convergence",
       {"Endpoint error against the exact flow for a ladder of step counts",
        isde::harness::convergence_study}},
      {"nfe-sweep", {"Compare solvers at equal NFE budgets", isde::harness::nfe_sweep}},
      {"kappa-sweep",
       {"Endpoint statistics of the iSDE solver across noise levels kappa",
        isde::harness::kappa_sweep}},
      {"marginal-check",
       {"Moment and KS checks of reverse samples against the exact marginal",
        isde::harness::marginal_check}},
      {"verify-weights",
       {"Closed-form step weights against adaptive quadrature", isde::harness::verify_weights}},
  };

  Args args;
  std::string chosen;
  for (const auto& [name, entry] : studies) {
    CLI::App* sub = app.add_subcommand(name, entry.first);
    sub->add_option("--config", args.config, "JSON config file")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", args.out, "Output directory")->capture_default_str();
    sub->add_option("--seed", args.seed, "Override the config seed");
    sub->callback([&chosen, name = name] { chosen = name; });
  }

  CLI11_PARSE(app, argc, argv);

  try {
    return run_study(chosen, studies.at(chosen).second, args);
  } catch (const isde::harness::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const isde::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
}
