#pragma once

#include <span>
#include <string>
#include <vector>

#include "evco/drive_cycle.hpp"
#include "evco/mpc_driver.hpp"
#include "evco/powertrain.hpp"

namespace evco {

/// The same powertrain with the gearbox replaced by one fixed reduction of
/// `gearbox.single_ratio` (final drive folded in).
Powertrain single_gear_powertrain(const Powertrain& models);

/// Inverse-dynamics tracking of the next reference sample through the single
/// reduction gear, clipped at the motor limit.
class ExactTracking : public Controller {
public:
  ExactTracking(MpcConfig config, const Powertrain& models);

  std::string name() const override { return "baseline"; }
  const Powertrain& plant() const override { return plant_; }
  Decision decide(const StepContext& ctx) override;

private:
  MpcConfig config_;
  Powertrain plant_;
};

/// First sub-problem only, applied through the single reduction gear.
class SmoothingSingleGear : public Controller {
public:
  SmoothingSingleGear(MpcConfig config, const Powertrain& models);

  std::string name() const override { return "smoothing-single-gear"; }
  const Powertrain& plant() const override { return plant_; }
  Decision decide(const StepContext& ctx) override;

private:
  MpcConfig config_;
  Powertrain plant_;
};

/// Speed thresholds of a multi-speed shift map. up[g - 1] moves g -> g + 1
/// and down[g - 1] moves g + 1 -> g. Up thresholds grow by
/// torque_slope * max(0, T_w).
struct ShiftSchedule {
  std::vector<double> up;    // m/s
  std::vector<double> down;  // m/s
  double torque_slope = 0.0;  // m/s per N m

  int gear_count() const { return static_cast<int>(up.size()) + 1; }
  void validate() const;
  /// Target gear for the current gear, speed and wheel torque.
  int target_gear(int gear, double speed, double wheel_torque) const;
};

inline constexpr double kShiftHysteresis = 0.05;

/// Picks the efficiency-best gear at steady cruise on a speed grid and puts
/// the thresholds at the preference crossovers, with down thresholds 5%
/// below. Throws DegenerateMap when one gear is preferred at every speed.
ShiftSchedule synthesize_shift_schedule(const MotorMap& map, const GearboxSpec& gearbox,
                                        const VehicleParams& params, double max_speed = 120.0 / 3.6,
                                        double grid_step = 0.25);

/// Smoothing for the torque, gear from the shift map one position at a time.
class ShiftMapController : public Controller {
public:
  ShiftMapController(MpcConfig config, Powertrain models, ShiftSchedule schedule);

  std::string name() const override { return "shift-map"; }
  const Powertrain& plant() const override { return models_; }
  Decision decide(const StepContext& ctx) override;

private:
  MpcConfig config_;
  Powertrain models_;
  ShiftSchedule schedule_;
};

/// Applies a fixed gear and wheel-torque trajectory.
class ReplayController : public Controller {
public:
  ReplayController(std::string name, Powertrain models, std::vector<int> gears,
                   std::vector<double> wheel_torque);

  std::string name() const override { return name_; }
  const Powertrain& plant() const override { return models_; }
  Decision decide(const StepContext& ctx) override;

private:
  std::string name_;
  Powertrain models_;
  std::vector<int> gears_;
  std::vector<double> wheel_torque_;
};

/// Speed and wheel-torque trajectory to be assigned gears, plus the SoC at
/// which each step's battery cost is evaluated.
struct DrivingProfile {
  std::vector<double> speed;
  std::vector<double> wheel_torque;
  std::vector<double> soc;
  double ts = 1.0;

  std::size_t size() const { return speed.size(); }
  void validate() const;
};

struct GearTrajectory {
  std::vector<int> gears;  // one per profile step
  double cost = 0.0;       // summed SoC decrement
  int shift_count(int start_gear) const;
};

/// SoC decrement of one profile step in `gear`; +infinity when the gear
/// cannot deliver the torque or the pack limit is exceeded.
double gear_stage_cost(const DrivingProfile& profile, std::size_t step, int gear,
                       const Powertrain& models);

/// Summed stage cost of a gear trajectory.
double gear_trajectory_cost(const DrivingProfile& profile, std::span<const int> gears,
                            const Powertrain& models);

/// Minimum-cost no-skip gear trajectory. The first step may be one position
/// away from `start_gear`. Ties prefer fewer shifts, then lower gears from
/// the first step on. Throws Infeasible if some step has no feasible gear.
GearTrajectory dp_gearshift(const DrivingProfile& profile, int start_gear, const Powertrain& models);

/// Closed-loop smoothing with the multi-speed torque bound, held in first
/// gear. Only the speed and wheel-torque trace of the result are meaningful.
RunResult smoothing_profile_run(const Scenario& scenario, const MpcConfig& config,
                                const Powertrain& models);

/// Profile of a logged run: speeds and wheel torques of the commanded rows.
DrivingProfile profile_from_run(const RunResult& run, double ts);

RunResult run_exact_tracking(const Scenario& scenario, const MpcConfig& config,
                             const Powertrain& models);
RunResult run_smoothing_single_gear(const Scenario& scenario, const MpcConfig& config,
                                    const Powertrain& models);
RunResult run_shift_map(const Scenario& scenario, const MpcConfig& config, const Powertrain& models,
                        const ShiftSchedule& schedule);
RunResult run_co_optimization(const Scenario& scenario, const MpcConfig& config,
                              const Powertrain& models);

/// Smoothing profile, DP gears over the whole profile, then replay. The DP
/// is solved twice, the second time at the SoC trace of the first replay.
RunResult run_dp_separate(const Scenario& scenario, const MpcConfig& config,
                          const Powertrain& models);

}  // namespace evco
