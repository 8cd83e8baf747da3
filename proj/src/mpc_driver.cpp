#include "evco/mpc_driver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <limits>

#include "evco/errors.hpp"

namespace evco {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) {
  return std::chrono::duration<double>(Clock::now() - t).count();
}

const GradeProfile kFlat{};

int infeasible_steps(const GearSequence& seq, const SmoothedPlan& plan, const Powertrain& models) {
  int count = 0;
  for (std::size_t i = 0; i < plan.torque.size(); ++i) {
    const auto op = motor_operating_point(plan.speed[i], plan.torque[i], seq.gears[i],
                                          models.gearbox, models.vehicle);
    if (std::abs(op.torque) > max_motor_torque(op.speed, models.motor)) ++count;
  }
  return count;
}

GearSequence fallback_sequence(int gear, const SmoothedPlan& plan, const Powertrain& models) {
  const std::size_t n = plan.torque.size();
  GearSequence best = GearSequence::hold(gear, n);
  int best_bad = infeasible_steps(best, plan, models);
  for (int u : {-1, 1}) {
    if (!models.gearbox.valid_gear(gear + u)) continue;
    std::vector<int> shifts(n, 0);
    shifts[0] = u;
    GearSequence seq = GearSequence::from_shifts(gear, std::move(shifts));
    const int bad = infeasible_steps(seq, plan, models);
    if (bad < best_bad) {
      best = std::move(seq);
      best_bad = bad;
    }
  }
  return best;
}

std::vector<double> clipped_warm_start(const SmoothedPlan& plan, const GearSequence& seq,
                                       const Powertrain& models) {
  std::vector<double> t = warm_start_torque(plan, seq, models);
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double ratio = models.gearbox.total_ratio(seq.gears[i]);
    const double cap =
        max_motor_torque(ratio * plan.speed[i] / models.vehicle.wheel_radius, models.motor);
    t[i] = std::clamp(t[i], -cap, cap);
  }
  return t;
}

std::vector<double> extended_leader(const DriveCycle& cycle, double gap, std::size_t extra) {
  std::vector<double> s = leader_position(cycle, gap);
  const double v_end = cycle.speeds.back();
  for (std::size_t i = 0; i < extra; ++i) s.push_back(s.back() + cycle.ts * v_end);
  return s;
}

}  // namespace

void MpcConfig::validate() const {
  if (horizon < 1) throw ValidationError("mpc.horizon must be at least 1");
  if (!(ts > 0)) throw ValidationError("mpc.ts must be positive");
  if (w1 < 0 || w2 < 0 || w3 < 0) throw ValidationError("mpc weights must be non-negative");
  if (penalty_weight < 0) throw ValidationError("mpc.penalty_weight must be non-negative");
  if (max_shifts < 0) throw ValidationError("mpc.max_shifts must be non-negative");
  if (!(headway.tau_min < headway.tau_max) || headway.tau_min < 0)
    throw ValidationError("mpc headway requires 0 <= tau_min < tau_max");
  if (headway.delta < 0) throw ValidationError("mpc.delta must be non-negative");
  if (!(v_min >= 0 && v_min < v_max)) throw ValidationError("mpc speed limits require 0 <= v_min < v_max");
  if (solver.max_iterations < 1) throw ValidationError("solver.max_iterations must be positive");
  if (!(solver.step_tolerance > 0 && solver.objective_tolerance > 0 && solver.gradient_tolerance > 0))
    throw ValidationError("solver tolerances must be positive");
}

SmoothingInput smoothing_input(const StepContext& ctx, const MpcConfig& config) {
  SmoothingInput in;
  in.position = ctx.state.position;
  in.speed = ctx.state.speed;
  in.reference = ctx.reference;
  in.leader = ctx.leader;
  in.previous_torque = ctx.previous_wheel_torque;
  in.w2 = config.w2;
  in.w3 = config.w3;
  in.headway = config.headway;
  in.v_min = config.v_min;
  in.v_max = config.v_max;
  in.ts = config.ts;
  in.penalty_weight = config.penalty_weight;
  if (ctx.grade != nullptr) in.grade = *ctx.grade;
  return in;
}

StepLog empty_stage_log() {
  StepLog log;
  log.smoothing_objective = log.gear_score = log.refined_objective = log.warm_objective =
      std::numeric_limits<double>::quiet_NaN();
  return log;
}

MpcStepResult mpc_step(const StepContext& ctx, const MpcConfig& config, const Powertrain& models,
                       const AdmissibleSets& sets) {
  const auto t0 = Clock::now();
  const GradeProfile& grade = ctx.grade != nullptr ? *ctx.grade : kFlat;
  MpcStepResult out;

  out.plan = solve_smoothing(smoothing_input(ctx, config), models, config.solver);

  std::vector<double> warm;
  try {
    const GearSelection selection = select_gear_sequence(sets, ctx.state.gear, out.plan, models);
    out.gears = selection.sequence;
    out.log.gear_score = selection.score;
    warm = warm_start_torque(out.plan, out.gears, models);
  } catch (const AllInfeasible&) {
    out.gears = fallback_sequence(ctx.state.gear, out.plan, models);
    out.log.gear_score = score_sequence(out.gears, out.plan, models);
    out.log.fallback = true;
    warm = clipped_warm_start(out.plan, out.gears, models);
  }

  RefinementInput refine;
  refine.position = ctx.state.position;
  refine.speed = ctx.state.speed;
  refine.soc = ctx.state.soc;
  refine.reference = ctx.reference;
  refine.leader = ctx.leader;
  refine.previous_torque = ctx.previous_motor_torque;
  refine.w1 = config.w1;
  refine.w2 = config.w2;
  refine.w3 = config.w3;
  refine.headway = config.headway;
  refine.v_min = config.v_min;
  refine.v_max = config.v_max;
  refine.ts = config.ts;
  refine.penalty_weight = config.penalty_weight;
  refine.grade = grade;
  out.refined = solve_refined(refine, out.gears, models, warm, config.solver);

  out.command.motor_torque = out.refined.torque.front();
  out.command.shift = out.gears.shifts.front();
  out.log.smoothing_objective = out.plan.objective;
  out.log.refined_objective = out.refined.objective;
  out.log.warm_objective = out.refined.warm_objective;
  out.log.planned_shifts = out.gears.shift_count();
  out.log.degraded = out.plan.degraded || out.refined.degraded;
  out.log.solve_time = seconds_since(t0);
  return out;
}

HierarchicalMpc::HierarchicalMpc(MpcConfig config, Powertrain models)
    : config_(std::move(config)),
      models_(std::move(models)),
      sets_(config_.horizon, config_.max_shifts, models_.gearbox.gear_count()) {}

Decision HierarchicalMpc::decide(const StepContext& ctx) {
  MpcStepResult r = mpc_step(ctx, config_, models_, sets_);
  Decision d;
  d.motor_torque = r.command.motor_torque;
  d.gear = ctx.state.gear;
  d.shift = r.command.shift;
  d.log = r.log;
  return d;
}

double speed_band_violation(double speed, double reference) {
  const SpeedBand band = speed_band(reference);
  return std::max({0.0, band.lower - speed, speed - band.upper});
}

double headway_violation(double gap, double speed, const HeadwayParams& headway) {
  return std::max({0.0, headway.lower(speed) - gap, gap - headway.upper(speed)});
}

RunResult simulate(const Scenario& scenario, const MpcConfig& config, Controller& controller) {
  config.validate();
  scenario.validate(config.headway, config.v_max);
  const Powertrain& models = controller.plant();
  const DriveCycle& cycle = scenario.cycle;
  const auto horizon = static_cast<std::size_t>(config.horizon);
  const std::vector<double> leader = extended_leader(cycle, scenario.initial_gap, horizon);

  RunResult result;
  result.controller = controller.name();
  result.cycle = cycle.name;
  result.horizon = config.horizon;

  VehicleState state = scenario.initial_state;
  state.gear = std::clamp(state.gear, 1, models.gearbox.gear_count());
  double prev_wheel = steady_state_torque(state.speed, models.vehicle, scenario.grade.at(state.position));
  double prev_motor = prev_wheel / models.gearbox.total_ratio(state.gear);

  const std::size_t steps = cycle.size();
  result.log.reserve(steps);
  double solve_total = 0.0;
  std::size_t solved = 0;

  for (std::size_t k = 0; k < steps; ++k) {
    StepLog row = empty_stage_log();
    if (k + 1 < steps) {
      StepContext ctx;
      ctx.step = k;
      ctx.state = state;
      ctx.reference = preview(cycle, k, horizon);
      if (scenario.disturbance.active(k))
        for (double& v : ctx.reference) v = std::clamp(v + scenario.disturbance.offset, 0.0, config.v_max);
      ctx.leader = preview(leader, k, horizon);
      ctx.previous_motor_torque = prev_motor;
      ctx.previous_wheel_torque = prev_wheel;
      ctx.grade = &scenario.grade;

      Decision d = controller.decide(ctx);
      row = d.log;
      if (!models.gearbox.valid_gear(d.gear) || std::abs(d.gear - state.gear) > 1)
        throw SimulationAborted("controller requested a gear skip", k);
      const double ratio = models.gearbox.total_ratio(d.gear);
      const double omega = ratio * state.speed / models.vehicle.wheel_radius;
      const double cap = max_motor_torque(omega, models.motor);
      const double torque = std::clamp(d.motor_torque, -cap, cap);
      row.clipped = row.clipped || torque != d.motor_torque;
      const double wheel = torque * ratio;
      const double pb = battery_power(omega, torque, models.motor, models.battery);

      SocStep soc;
      try {
        soc = step_soc(state.soc, pb, config.ts, models.battery);
      } catch (const PowerLimitExceeded& e) {
        throw SimulationAborted(e.what(), k);
      }
      if (soc.clamped) throw SimulationAborted("SoC reached a bound", k);

      result.shift_count += std::abs(d.gear - state.gear);
      row.gear = d.gear;
      row.motor_torque = torque;
      row.wheel_torque = wheel;
      row.battery_power = pb;
      solve_total += row.solve_time;
      result.max_solve_time = std::max(result.max_solve_time, row.solve_time);
      ++solved;

      VehicleState next =
          step_vehicle(state, wheel, config.ts, models.vehicle, scenario.grade.at(state.position));
      next.soc = soc.soc;
      next.gear = d.gear + d.shift;
      if (!models.gearbox.valid_gear(next.gear)) throw SimulationAborted("shift out of gear range", k);
      result.shift_count += std::abs(d.shift);
      // Logged with the state the command was applied to.
      row.speed = state.speed;
      row.position = state.position;
      row.soc = state.soc;
      prev_motor = torque;
      prev_wheel = wheel;
      state = next;
    } else {
      row.gear = state.gear;
      row.speed = state.speed;
      row.position = state.position;
      row.soc = state.soc;
    }
    row.step = k;
    row.time = config.ts * static_cast<double>(k);
    row.v_ref = cycle.speeds[k];
    row.gap = leader[k] - row.position;
    result.log.push_back(row);
  }

  double sq = 0.0;
  for (const StepLog& row : result.log) {
    const double err = row.speed - row.v_ref;
    sq += err * err;
    const double hard = std::max({0.0, config.v_min - row.speed, row.speed - config.v_max});
    if (hard > 0) {
      ++result.hard_violations;
      result.max_hard_violation = std::max(result.max_hard_violation, hard);
    }
    const double band = speed_band_violation(row.speed, row.v_ref);
    if (band > 1e-9) {
      ++result.speed_band_violations;
      result.max_speed_band_violation = std::max(result.max_speed_band_violation, band);
    }
    const double gap = headway_violation(row.gap, row.speed, config.headway);
    if (gap > 1e-9) {
      ++result.headway_violations;
      result.max_headway_violation = std::max(result.max_headway_violation, gap);
    }
    result.clipped_steps += row.clipped ? 1 : 0;
    result.fallback_steps += row.fallback ? 1 : 0;
    result.degraded_steps += row.degraded ? 1 : 0;
  }
  result.tracking_rms = std::sqrt(sq / static_cast<double>(result.log.size()));
  result.delta_soc = 100.0 * (result.log.front().soc - result.log.back().soc);
  result.mean_solve_time = solved > 0 ? solve_total / static_cast<double>(solved) : 0.0;
  return result;
}

}  // namespace evco
