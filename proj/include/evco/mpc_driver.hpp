#pragma once

#include <memory>
#include <string>
#include <vector>

#include "evco/drive_cycle.hpp"
#include "evco/gearshift_search.hpp"
#include "evco/horizon_refiner.hpp"
#include "evco/local_nlp.hpp"
#include "evco/powertrain.hpp"
#include "evco/speed_smoother.hpp"

namespace evco {

struct MpcConfig {
  int horizon = 5;
  double ts = 1.0;
  double w1 = 2000.0;
  double w2 = 1.0;
  double w3 = 1.0;
  double penalty_weight = 1e4;
  int max_shifts = 1;
  HeadwayParams headway;
  double v_min = 0.0;
  double v_max = 120.0 / 3.6;
  SolveSettings solver;

  void validate() const;
};

/// What the controller sees at step k.
struct StepContext {
  std::size_t step = 0;
  VehicleState state;             // gear is the gear engaged for this step
  std::vector<double> reference;  // v^r_{k..k+N}
  std::vector<double> leader;     // s^r_{k..k+N}
  double previous_motor_torque = 0.0;
  double previous_wheel_torque = 0.0;
  const GradeProfile* grade = nullptr;
};

/// One row of the closed-loop log. Stage fields are NaN where a controller
/// does not run that stage.
struct StepLog {
  std::size_t step = 0;
  double time = 0.0;
  double v_ref = 0.0;
  double speed = 0.0;
  double position = 0.0;
  double gap = 0.0;
  int gear = 1;
  double motor_torque = 0.0;
  double wheel_torque = 0.0;
  double battery_power = 0.0;
  double soc = 0.0;
  double smoothing_objective = 0.0;
  double gear_score = 0.0;
  double refined_objective = 0.0;
  double warm_objective = 0.0;
  double solve_time = 0.0;
  int planned_shifts = 0;
  bool fallback = false;
  bool degraded = false;
  bool clipped = false;
};

/// Controller output for step k. `gear` is engaged for this step (at most one
/// position away from the previous gear); `shift` is applied after the step.
struct Decision {
  double motor_torque = 0.0;
  int gear = 1;
  int shift = 0;
  StepLog log;
};

class Controller {
public:
  virtual ~Controller() = default;
  virtual std::string name() const = 0;
  /// Plant the controller drives. Single-ratio controllers return a one-gear box.
  virtual const Powertrain& plant() const = 0;
  virtual Decision decide(const StepContext& ctx) = 0;
};

/// First sub-problem inputs for the step, with the previous wheel torque as
/// the rate reference.
SmoothingInput smoothing_input(const StepContext& ctx, const MpcConfig& config);

/// StepLog with every stage field set to NaN.
StepLog empty_stage_log();

struct MpcStepResult {
  PowertrainCommand command;
  StepLog log;
  SmoothedPlan plan;
  GearSequence gears;
  RefinedSolution refined;
};

/// One pass of smoothing, gear search and refinement. On AllInfeasible the
/// gear sequence falls back to holding or a one-step shift, whichever leaves
/// the fewest torque-infeasible steps, with torques clipped to the limit.
MpcStepResult mpc_step(const StepContext& ctx, const MpcConfig& config, const Powertrain& models,
                       const AdmissibleSets& sets);

class HierarchicalMpc : public Controller {
public:
  HierarchicalMpc(MpcConfig config, Powertrain models);

  std::string name() const override { return "co-optimization"; }
  const Powertrain& plant() const override { return models_; }
  Decision decide(const StepContext& ctx) override;

  const AdmissibleSets& sets() const { return sets_; }

private:
  MpcConfig config_;
  Powertrain models_;
  AdmissibleSets sets_;
};

struct RunResult {
  std::string controller;
  std::string cycle;
  int horizon = 0;
  double delta_soc = 0.0;     // percent, 100 (SoC_0 - SoC_end)
  double tracking_rms = 0.0;  // m/s
  int shift_count = 0;
  int hard_violations = 0;
  double max_hard_violation = 0.0;
  int speed_band_violations = 0;
  double max_speed_band_violation = 0.0;
  int headway_violations = 0;
  double max_headway_violation = 0.0;
  int clipped_steps = 0;
  int fallback_steps = 0;
  int degraded_steps = 0;
  double mean_solve_time = 0.0;
  double max_solve_time = 0.0;
  std::vector<StepLog> log;  // one row per cycle sample; the last row carries no command
};

/// Closed-loop simulation of `controller` on the scenario. The plant is the
/// controller's own model. Throws SimulationAborted when SoC leaves its bounds
/// or the pack limit is exceeded.
RunResult simulate(const Scenario& scenario, const MpcConfig& config, Controller& controller);

/// Per-step soft-constraint violation magnitudes of a logged state.
double speed_band_violation(double speed, double reference);
double headway_violation(double gap, double speed, const HeadwayParams& headway);

}  // namespace evco
