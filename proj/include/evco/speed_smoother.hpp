#pragma once

#include <span>
#include <vector>

#include "evco/drive_cycle.hpp"
#include "evco/local_nlp.hpp"
#include "evco/powertrain.hpp"

namespace evco {

/// Everything the first (gear-free) sub-problem needs at one MPC step.
struct SmoothingInput {
  double position = 0.0;           // current ego position, m
  double speed = 0.0;              // current ego speed, m/s
  std::vector<double> reference;   // v^r over the horizon, N + 1 samples
  std::vector<double> leader;      // leader positions, N + 1 samples
  double previous_torque = 0.0;    // wheel torque applied at the previous step, N m
  double w2 = 1.0;                 // tracking weight
  double w3 = 1.0;                 // torque-rate weight
  HeadwayParams headway;
  double v_min = 0.0;
  double v_max = 120.0 / 3.6;
  double ts = 1.0;
  double penalty_weight = 1e4;
  GradeProfile grade;

  std::size_t horizon() const { return reference.empty() ? 0 : reference.size() - 1; }
  void validate() const;
};

/// Soft speed band around the reference, [max(0.9 v, 0.5), 1.1 v]. Where that
/// band is empty (v below 0.5/1.1 m/s) it becomes [0, max(1.1 v, 0.5)].
struct SpeedBand {
  double lower = 0.0;
  double upper = 0.0;
};
SpeedBand speed_band(double reference_speed);

/// One-sided quadratic violation of [lower, upper].
inline double band_violation_sq(double value, double lower, double upper) {
  const double below = value < lower ? lower - value : 0.0;
  const double above = value > upper ? value - upper : 0.0;
  return below * below + above * above;
}

struct Rollout {
  std::vector<double> speed;     // N + 1
  std::vector<double> position;  // N + 1
};

/// Forward Euler simulation of the wheel-torque sequence from the input's state.
Rollout rollout_wheel_torque(const SmoothingInput& input, const VehicleParams& params,
                             std::span<const double> wheel_torque);

/// Tracking + smoothing cost plus the soft band, headway and hard speed penalties.
double smoothing_objective(const SmoothingInput& input, const VehicleParams& params,
                           std::span<const double> wheel_torque);

/// |T_w,i| bound from the highest total ratio along the given speeds.
std::vector<double> wheel_torque_bounds(std::span<const double> speeds, const Powertrain& models);

struct TrackingTorque {
  std::vector<double> torque;
  std::vector<bool> clipped;
  bool any_clipped() const;
};

/// Inverse-dynamics torques landing each Euler step on the next reference
/// sample, clipped to the motor limit through `total_ratio`.
TrackingTorque tracking_torque(double speed, std::span<const double> reference,
                               const VehicleParams& params, const MotorMap& map,
                               double total_ratio, double ts = 1.0,
                               const GradeProfile& grade = {}, double position = 0.0);

/// Box-bounded program over the wheel torques. Bounds are evaluated along the
/// rollout of `bound_torques`.
SmoothProgram build_smoothing_program(const SmoothingInput& input, const Powertrain& models,
                                      std::span<const double> bound_torques);

struct SmoothedPlan {
  std::vector<double> torque;    // N
  std::vector<double> speed;     // N + 1
  std::vector<double> position;  // N + 1
  double objective = 0.0;
  double guess_objective = 0.0;
  bool degraded = false;
  int iterations = 0;
};

/// Solves the smoothing problem from the tracking guess with two-pass bound
/// tightening. The returned objective never exceeds the tracking guess's.
SmoothedPlan solve_smoothing(const SmoothingInput& input, const Powertrain& models,
                             const SolveSettings& settings = {});

}  // namespace evco
