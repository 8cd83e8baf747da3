#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "evco/drive_cycle.hpp"
#include "evco/mpc_driver.hpp"
#include "evco/powertrain.hpp"

namespace evco {

struct ScenarioSpec {
  std::string name;
  std::string cycle;                  // builtin name or CSV path
  std::optional<double> initial_gap;  // m; band midpoint when absent
};

/// Everything a sweep needs. Defaults reproduce the reference setup.
struct ExperimentConfig {
  Powertrain models;
  MpcConfig mpc;
  double initial_soc = 0.8;
  std::vector<int> horizons{5};
  std::vector<ScenarioSpec> scenarios{{"urban", "urban", {}}, {"highway", "highway", {}}};
  std::vector<std::string> controllers;
  std::filesystem::path output_dir = "out";
  std::uint64_t seed = 0;
  std::filesystem::path base_dir;  // relative cycle paths resolve against this

  ExperimentConfig();
};

/// Known controller names, in reporting order.
const std::vector<std::string>& controller_names();

/// Reads an INI document. Unknown sections or keys and malformed values are
/// all collected into one ConfigError.
ExperimentConfig parse_config(std::istream& in, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);

/// Invariant checks that need no simulation, including cycle resolution.
std::vector<std::string> config_violations(const ExperimentConfig& config);

Scenario resolve_scenario(const ScenarioSpec& entry, const ExperimentConfig& config);

/// Runs one named controller on the scenario with the given horizon.
RunResult run_controller(const std::string& controller, const Scenario& scenario,
                         const MpcConfig& mpc, const Powertrain& models);

struct SummaryRow {
  std::string controller;
  std::string cycle;
  int horizon = 0;
  double delta_soc = 0.0;     // percent
  double improvement = 0.0;   // percent over the exact-tracking baseline; NaN without one
  int shifts = 0;
  double tracking_rms = 0.0;
  double mean_solve_time = 0.0;
  double max_solve_time = 0.0;
  int hard_violations = 0;
  int speed_band_violations = 0;
  int headway_violations = 0;
  int fallback_steps = 0;
};

/// One row per run; improvement is 100 (base - ctrl) / base against the
/// baseline run of the same cycle and horizon.
std::vector<SummaryRow> summarize(const std::vector<RunResult>& runs);

void write_trajectory(std::ostream& out, const RunResult& run);
void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows);
nlohmann::json summary_json(const std::vector<SummaryRow>& rows);

/// Column-named numeric table read back from a trajectory CSV.
struct Trajectory {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  std::size_t column(const std::string& name) const;
};
Trajectory read_trajectory(std::istream& in);

std::string trajectory_file_name(const std::string& scenario, const std::string& controller,
                                 int horizon);

struct RunOptions {
  std::optional<std::filesystem::path> output_dir;
  unsigned jobs = 1;
};

/// Runs every scenario x controller x horizon, writing one trajectory file
/// per run plus summary.csv and summary.json. Returns 0, or 3 after a model
/// or runtime error (reported on `err` with scenario and step).
int run_experiment(const ExperimentConfig& config, const RunOptions& options, std::ostream& log,
                   std::ostream& err);

/// Writes the builtin cycles as <name>.csv into `dir`.
void emit_cycles(const std::filesystem::path& dir, std::uint64_t seed);

}  // namespace evco
