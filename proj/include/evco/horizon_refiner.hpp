#pragma once

#include <span>
#include <vector>

#include "evco/drive_cycle.hpp"
#include "evco/gearshift_search.hpp"
#include "evco/local_nlp.hpp"
#include "evco/powertrain.hpp"
#include "evco/speed_smoother.hpp"

namespace evco {

/// Inputs of the full-cost refinement with the gear sequence fixed.
struct RefinementInput {
  double position = 0.0;
  double speed = 0.0;
  double soc = 0.8;
  std::vector<double> reference;  // N + 1
  std::vector<double> leader;     // N + 1
  double previous_torque = 0.0;   // motor torque applied at the previous step
  double w1 = 2000.0;             // SoC-consumption weight (fractional SoC)
  double w2 = 1.0;
  double w3 = 1.0;
  HeadwayParams headway;
  double v_min = 0.0;
  double v_max = 120.0 / 3.6;
  double ts = 1.0;
  double penalty_weight = 1e4;
  GradeProfile grade;

  std::size_t horizon() const { return reference.empty() ? 0 : reference.size() - 1; }
  void validate() const;
};

/// Predicted trajectories under a motor-torque sequence and fixed gears.
struct RefinedRollout {
  std::vector<double> speed;     // N + 1
  std::vector<double> position;  // N + 1
  std::vector<double> soc;       // N + 1
  std::vector<double> battery_power;  // N
};

/// Throws PowerLimitExceeded if a step demands more than the pack can give.
RefinedRollout rollout_motor_torque(const RefinementInput& input, const GearSequence& gears,
                                    const Powertrain& models, std::span<const double> motor_torque);

/// Full horizon cost: -w1 dSoC + w2 (v - v^r)^2 + w3 dT_m^2 plus soft penalties.
/// Returns +infinity when the pack limit is exceeded.
double refined_objective(const RefinementInput& input, const GearSequence& gears,
                         const Powertrain& models, std::span<const double> motor_torque);

/// Motor torques T_w / (i_g i0) for the plan under the given gears.
std::vector<double> warm_start_torque(const SmoothedPlan& plan, const GearSequence& gears,
                                      const Powertrain& models);

/// Program over the motor torques with per-step bounds +/- T_max(w_m)
/// evaluated along the rollout of `warm_start`.
SmoothProgram build_refined_program(const RefinementInput& input, const GearSequence& gears,
                                    const Powertrain& models, std::span<const double> warm_start);

struct RefinedSolution {
  std::vector<double> torque;  // N motor torques
  GearSequence gears;
  double objective = 0.0;
  double warm_objective = 0.0;
  RefinedRollout rollout;
  bool degraded = false;
  int iterations = 0;
};

/// Minimizes the full cost from the warm start; never returns a point worse
/// than the warm start, and falls back to it on solver failure.
RefinedSolution solve_refined(const RefinementInput& input, const GearSequence& gears,
                              const Powertrain& models, std::span<const double> warm_start,
                              const SolveSettings& settings = {});

}  // namespace evco
