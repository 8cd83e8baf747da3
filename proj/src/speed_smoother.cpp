#include "evco/speed_smoother.hpp"

#include <algorithm>
#include <cmath>

#include "evco/errors.hpp"

namespace evco {

namespace {

constexpr double kHardPenaltyFactor = 100.0;

// Projects a plan onto the hard speed limits by replacing the offending
// torques with the inverse-dynamics torque that lands on the limit.
void enforce_speed_limits(const SmoothingInput& input, const Powertrain& models,
                          std::vector<double>& torque) {
  VehicleState state{input.position, input.speed, 0.0, 1};
  for (std::size_t i = 0; i < torque.size(); ++i) {
    const double grade = input.grade.at(state.position);
    VehicleState next = step_vehicle(state, torque[i], input.ts, models.vehicle, grade);
    double target = next.speed;
    if (next.speed > input.v_max) target = input.v_max;
    if (next.speed < input.v_min) target = input.v_min;
    if (target != next.speed) {
      const double w = models.gearbox.max_total_ratio();
      const double cap =
          max_motor_torque(w * state.speed / models.vehicle.wheel_radius, models.motor) * w;
      torque[i] = std::clamp(
          inverse_dynamics_torque(state.speed, target, input.ts, models.vehicle, grade), -cap, cap);
      next = step_vehicle(state, torque[i], input.ts, models.vehicle, grade);
    }
    state = next;
  }
}

}  // namespace

void SmoothingInput::validate() const {
  if (reference.size() < 2) throw ValidationError("smoothing preview needs at least two samples");
  if (leader.size() != reference.size())
    throw ValidationError("leader positions and reference preview differ in length");
  if (w2 < 0 || w3 < 0 || penalty_weight < 0) throw ValidationError("weights must be non-negative");
  if (!(ts > 0)) throw ValidationError("sample period must be positive");
  if (speed < 0) throw ValidationError("speed must be non-negative");
}

SpeedBand speed_band(double reference_speed) {
  const double lower = std::max(0.9 * reference_speed, 0.5);
  const double upper = 1.1 * reference_speed;
  if (lower > upper) return {0.0, std::max(upper, 0.5)};
  return {lower, upper};
}

Rollout rollout_wheel_torque(const SmoothingInput& input, const VehicleParams& params,
                             std::span<const double> wheel_torque) {
  Rollout r;
  r.speed.resize(wheel_torque.size() + 1);
  r.position.resize(wheel_torque.size() + 1);
  VehicleState state{input.position, input.speed, 0.0, 1};
  r.speed[0] = state.speed;
  r.position[0] = state.position;
  for (std::size_t i = 0; i < wheel_torque.size(); ++i) {
    state = step_vehicle(state, wheel_torque[i], input.ts, params, input.grade.at(state.position));
    r.speed[i + 1] = state.speed;
    r.position[i + 1] = state.position;
  }
  return r;
}

double smoothing_objective(const SmoothingInput& input, const VehicleParams& params,
                           std::span<const double> wheel_torque) {
  const Rollout r = rollout_wheel_torque(input, params, wheel_torque);
  const double hard = kHardPenaltyFactor * input.penalty_weight;
  double cost = 0.0;
  double prev = input.previous_torque;
  for (std::size_t i = 0; i < wheel_torque.size(); ++i) {
    const double err = r.speed[i + 1] - input.reference[i + 1];
    const double rate = wheel_torque[i] - prev;
    cost += input.w2 * err * err + input.w3 * rate * rate;
    prev = wheel_torque[i];

    const SpeedBand band = speed_band(input.reference[i]);
    cost += input.penalty_weight * band_violation_sq(r.speed[i], band.lower, band.upper);
    const double gap = input.leader[i] - r.position[i];
    cost += input.penalty_weight * band_violation_sq(gap, input.headway.lower(r.speed[i]),
                                                     input.headway.upper(r.speed[i]));
    cost += hard * band_violation_sq(r.speed[i + 1], input.v_min, input.v_max);
  }
  return cost;
}

std::vector<double> wheel_torque_bounds(std::span<const double> speeds, const Powertrain& models) {
  const double ratio = models.gearbox.max_total_ratio();
  std::vector<double> bounds(speeds.size());
  for (std::size_t i = 0; i < speeds.size(); ++i)
    bounds[i] =
        max_motor_torque(ratio * speeds[i] / models.vehicle.wheel_radius, models.motor) * ratio;
  return bounds;
}

bool TrackingTorque::any_clipped() const {
  return std::any_of(clipped.begin(), clipped.end(), [](bool c) { return c; });
}

TrackingTorque tracking_torque(double speed, std::span<const double> reference,
                               const VehicleParams& params, const MotorMap& map,
                               double total_ratio, double ts, const GradeProfile& grade,
                               double position) {
  TrackingTorque out;
  if (reference.size() < 2) return out;
  const std::size_t n = reference.size() - 1;
  out.torque.resize(n);
  out.clipped.resize(n);
  VehicleState state{position, speed, 0.0, 1};
  for (std::size_t i = 0; i < n; ++i) {
    const double theta = grade.at(state.position);
    const double want = inverse_dynamics_torque(state.speed, reference[i + 1], ts, params, theta);
    const double cap =
        max_motor_torque(total_ratio * state.speed / params.wheel_radius, map) * total_ratio;
    out.torque[i] = std::clamp(want, -cap, cap);
    out.clipped[i] = out.torque[i] != want;
    state = step_vehicle(state, out.torque[i], ts, params, theta);
  }
  return out;
}

SmoothProgram build_smoothing_program(const SmoothingInput& input, const Powertrain& models,
                                      std::span<const double> bound_torques) {
  input.validate();
  const Rollout along = rollout_wheel_torque(input, models.vehicle, bound_torques);
  const auto caps = wheel_torque_bounds(
      std::span<const double>(along.speed.data(), bound_torques.size()), models);
  SmoothProgram program;
  program.upper = caps;
  program.lower.resize(caps.size());
  std::transform(caps.begin(), caps.end(), program.lower.begin(), [](double c) { return -c; });
  const VehicleParams params = models.vehicle;
  program.objective = [input, params](std::span<const double> x) {
    return smoothing_objective(input, params, x);
  };
  return program;
}

SmoothedPlan solve_smoothing(const SmoothingInput& input, const Powertrain& models,
                             const SolveSettings& settings) {
  input.validate();
  const TrackingTorque guess =
      tracking_torque(input.speed, input.reference, models.vehicle, models.motor,
                      models.gearbox.max_total_ratio(), input.ts, input.grade, input.position);
  std::vector<double> guess_torque = guess.torque;
  enforce_speed_limits(input, models, guess_torque);
  const double guess_objective = smoothing_objective(input, models.vehicle, guess_torque);

  SmoothedPlan plan;
  plan.guess_objective = guess_objective;
  std::vector<double> best = guess_torque;
  double best_objective = guess_objective;
  try {
    std::vector<double> start = guess_torque;
    for (int pass = 0; pass < 2; ++pass) {
      const SmoothProgram program = build_smoothing_program(input, models, start);
      const SolveReport report = minimize(program, program.project(start), settings);
      plan.iterations += report.iterations;
      std::vector<double> candidate = report.x;
      enforce_speed_limits(input, models, candidate);
      const double value = smoothing_objective(input, models.vehicle, candidate);
      if (value < best_objective) {
        best_objective = value;
        best = candidate;
      }
      start = candidate;
    }
  } catch (const Error&) {
    plan.degraded = true;
  }

  const Rollout r = rollout_wheel_torque(input, models.vehicle, best);
  plan.torque = std::move(best);
  plan.speed = r.speed;
  plan.position = r.position;
  plan.objective = best_objective;
  return plan;
}

}  // namespace evco
