#include "evco/horizon_refiner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "evco/errors.hpp"

namespace evco {

namespace {

constexpr double kHardPenaltyFactor = 100.0;

bool within_speed_limits(const RefinementInput& input, const RefinedRollout& r) {
  for (std::size_t i = 1; i < r.speed.size(); ++i)
    if (r.speed[i] < input.v_min || r.speed[i] > input.v_max) return false;
  return true;
}

}  // namespace

void RefinementInput::validate() const {
  if (reference.size() < 2) throw ValidationError("refinement preview needs at least two samples");
  if (leader.size() != reference.size())
    throw ValidationError("leader positions and reference preview differ in length");
  if (w1 < 0 || w2 < 0 || w3 < 0 || penalty_weight < 0)
    throw ValidationError("weights must be non-negative");
  if (!(ts > 0)) throw ValidationError("sample period must be positive");
}

RefinedRollout rollout_motor_torque(const RefinementInput& input, const GearSequence& gears,
                                    const Powertrain& models, std::span<const double> motor_torque) {
  const std::size_t n = motor_torque.size();
  RefinedRollout r;
  r.speed.resize(n + 1);
  r.position.resize(n + 1);
  r.soc.resize(n + 1);
  r.battery_power.resize(n);
  VehicleState state{input.position, input.speed, input.soc, gears.gears.front()};
  r.speed[0] = state.speed;
  r.position[0] = state.position;
  r.soc[0] = state.soc;
  for (std::size_t i = 0; i < n; ++i) {
    const double ratio = models.gearbox.total_ratio(gears.gears[i]);
    const double wheel = motor_torque[i] * ratio;
    const double omega = ratio * state.speed / models.vehicle.wheel_radius;
    const double pb = battery_power(omega, motor_torque[i], models.motor, models.battery);
    r.battery_power[i] = pb;
    const double soc = step_soc(state.soc, pb, input.ts, models.battery).soc;
    state = step_vehicle(state, wheel, input.ts, models.vehicle, input.grade.at(state.position));
    state.soc = soc;
    r.speed[i + 1] = state.speed;
    r.position[i + 1] = state.position;
    r.soc[i + 1] = state.soc;
  }
  return r;
}

double refined_objective(const RefinementInput& input, const GearSequence& gears,
                         const Powertrain& models, std::span<const double> motor_torque) {
  RefinedRollout r;
  try {
    r = rollout_motor_torque(input, gears, models, motor_torque);
  } catch (const PowerLimitExceeded&) {
    return std::numeric_limits<double>::infinity();
  }
  const double hard = kHardPenaltyFactor * input.penalty_weight;
  double cost = 0.0;
  double prev = input.previous_torque;
  for (std::size_t i = 0; i < motor_torque.size(); ++i) {
    const double dsoc = r.soc[i + 1] - r.soc[i];
    const double err = r.speed[i + 1] - input.reference[i + 1];
    const double rate = motor_torque[i] - prev;
    cost += -input.w1 * dsoc + input.w2 * err * err + input.w3 * rate * rate;
    prev = motor_torque[i];

    const SpeedBand band = speed_band(input.reference[i]);
    cost += input.penalty_weight * band_violation_sq(r.speed[i], band.lower, band.upper);
    const double gap = input.leader[i] - r.position[i];
    cost += input.penalty_weight * band_violation_sq(gap, input.headway.lower(r.speed[i]),
                                                     input.headway.upper(r.speed[i]));
    cost += hard * band_violation_sq(r.speed[i + 1], input.v_min, input.v_max);
  }
  return cost;
}

std::vector<double> warm_start_torque(const SmoothedPlan& plan, const GearSequence& gears,
                                      const Powertrain& models) {
  std::vector<double> t(plan.torque.size());
  for (std::size_t i = 0; i < t.size(); ++i)
    t[i] = plan.torque[i] / models.gearbox.total_ratio(gears.gears[i]);
  return t;
}

SmoothProgram build_refined_program(const RefinementInput& input, const GearSequence& gears,
                                    const Powertrain& models, std::span<const double> warm_start) {
  input.validate();
  if (gears.horizon() != warm_start.size() || input.horizon() != warm_start.size())
    throw ValidationError("gear sequence, preview and warm start differ in horizon");
  // Bounds follow the kinematics only, so a pack-limited warm start still gets a box.
  std::vector<double> speeds(warm_start.size());
  VehicleState state{input.position, input.speed, input.soc, gears.gears.front()};
  for (std::size_t i = 0; i < warm_start.size(); ++i) {
    speeds[i] = state.speed;
    const double wheel = warm_start[i] * models.gearbox.total_ratio(gears.gears[i]);
    state = step_vehicle(state, wheel, input.ts, models.vehicle, input.grade.at(state.position));
  }
  SmoothProgram program;
  program.lower.resize(warm_start.size());
  program.upper.resize(warm_start.size());
  for (std::size_t i = 0; i < warm_start.size(); ++i) {
    const double ratio = models.gearbox.total_ratio(gears.gears[i]);
    const double cap =
        max_motor_torque(ratio * speeds[i] / models.vehicle.wheel_radius, models.motor);
    program.lower[i] = -cap;
    program.upper[i] = cap;
  }
  program.objective = [input, gears, models](std::span<const double> x) {
    return refined_objective(input, gears, models, x);
  };
  return program;
}

RefinedSolution solve_refined(const RefinementInput& input, const GearSequence& gears,
                              const Powertrain& models, std::span<const double> warm_start,
                              const SolveSettings& settings) {
  const SmoothProgram program = build_refined_program(input, gears, models, warm_start);
  const std::vector<double> start = program.project(warm_start);

  RefinedSolution out;
  out.gears = gears;
  out.torque = start;
  out.warm_objective = refined_objective(input, gears, models, start);
  out.objective = out.warm_objective;
  try {
    const SolveReport report = minimize(program, start, settings);
    out.iterations = report.iterations;
    if (report.objective <= out.warm_objective) {
      const RefinedRollout r = rollout_motor_torque(input, gears, models, report.x);
      if (within_speed_limits(input, r) ||
          !within_speed_limits(input, rollout_motor_torque(input, gears, models, start))) {
        out.torque = report.x;
        out.objective = report.objective;
      }
    }
  } catch (const Error&) {
    out.degraded = true;
  }
  try {
    out.rollout = rollout_motor_torque(input, gears, models, out.torque);
  } catch (const PowerLimitExceeded&) {
    out.degraded = true;
  }
  return out;
}

}  // namespace evco
