// Command-line driver: run experiment sweeps, check configs, export cycles.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "evco/errors.hpp"
#include "evco/experiment.hpp"

namespace {

constexpr int kConfigError = 2;
constexpr int kRuntimeError = 3;

int report_config_error(const evco::ConfigError& e) {
  std::cerr << "configuration errors:\n";
  for (const auto& v : e.violations()) std::cerr << "  " << v << '\n';
  return kConfigError;
}

std::optional<evco::ExperimentConfig> load_checked(const std::string& path,
                                                   std::optional<std::uint64_t> seed, int& code) {
  try {
    auto config = evco::load_config(path);
    if (seed) config.seed = *seed;
    const auto violations = evco::config_violations(config);
    if (!violations.empty()) {
      code = report_config_error(evco::ConfigError(violations));
      return std::nullopt;
    }
    return config;
  } catch (const evco::ConfigError& e) {
    code = report_config_error(e);
    return std::nullopt;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Speed and gearshift co-optimization for multi-speed electric vehicles"};
  app.require_subcommand(1);

  std::string out_dir;
  unsigned jobs = 1;
  std::uint64_t seed = 0;
  std::string config_path;
  std::string cycles_dir;

  auto* run = app.add_subcommand("run", "Run every scenario x controller x horizon in a config");
  run->add_option("config", config_path, "INI configuration file")->required();
  run->add_option("--out", out_dir, "Output directory (overrides the config)");
  run->add_option("--jobs", jobs, "Parallel runs")->check(CLI::PositiveNumber);
  auto* run_seed = run->add_option("--seed", seed, "Seed for the builtin cycles");

  auto* validate = app.add_subcommand("validate", "Check a config without running it");
  validate->add_option("config", config_path, "INI configuration file")->required();
  auto* validate_seed = validate->add_option("--seed", seed, "Seed for the builtin cycles");

  auto* emit = app.add_subcommand("emit-cycles", "Write the builtin cycles as CSV");
  emit->add_option("dir", cycles_dir, "Output directory")->required();
  emit->add_option("--seed", seed, "Seed for the builtin cycles");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kConfigError;
  }

  int code = 0;
  try {
    if (*run) {
      auto config = load_checked(config_path, *run_seed ? std::optional(seed) : std::nullopt, code);
      if (!config) return code;
      evco::RunOptions options;
      if (!out_dir.empty()) options.output_dir = out_dir;
      options.jobs = jobs;
      return evco::run_experiment(*config, options, std::cout, std::cerr);
    }
    if (*validate) {
      auto config = load_checked(config_path, *validate_seed ? std::optional(seed) : std::nullopt, code);
      if (!config) return code;
      std::cout << config_path << ": ok\n";
      return 0;
    }
    evco::emit_cycles(cycles_dir, seed);
    std::cout << "wrote urban.csv and highway.csv to " << cycles_dir << '\n';
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntimeError;
  }
}
