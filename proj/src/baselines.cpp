#include "evco/baselines.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <tuple>

#include "evco/errors.hpp"
#include "evco/speed_smoother.hpp"

namespace evco {

namespace {

using Clock = std::chrono::steady_clock;
constexpr double kInf = std::numeric_limits<double>::infinity();

double seconds_since(Clock::time_point t) {
  return std::chrono::duration<double>(Clock::now() - t).count();
}

/// Smoothing torque through a gear chosen by the caller.
class HeldGearSmoothing : public Controller {
public:
  HeldGearSmoothing(MpcConfig config, Powertrain models)
      : config_(std::move(config)), models_(std::move(models)) {}

  std::string name() const override { return "smoothing-profile"; }
  const Powertrain& plant() const override { return models_; }

  Decision decide(const StepContext& ctx) override {
    const auto t0 = Clock::now();
    const SmoothedPlan plan = solve_smoothing(smoothing_input(ctx, config_), models_, config_.solver);
    Decision d;
    d.log = empty_stage_log();
    d.gear = ctx.state.gear;
    d.motor_torque = plan.torque.front() / models_.gearbox.total_ratio(d.gear);
    d.log.smoothing_objective = plan.objective;
    d.log.degraded = plan.degraded;
    d.log.solve_time = seconds_since(t0);
    return d;
  }

private:
  MpcConfig config_;
  Powertrain models_;
};

int start_gear(const Scenario& scenario, const Powertrain& models) {
  return std::clamp(scenario.initial_state.gear, 1, models.gearbox.gear_count());
}

}  // namespace

Powertrain single_gear_powertrain(const Powertrain& models) {
  Powertrain out = models;
  out.gearbox.ratios = {models.gearbox.single_ratio};
  out.gearbox.final_drive = 1.0;
  return out;
}

ExactTracking::ExactTracking(MpcConfig config, const Powertrain& models)
    : config_(std::move(config)), plant_(single_gear_powertrain(models)) {}

Decision ExactTracking::decide(const StepContext& ctx) {
  const auto t0 = Clock::now();
  const double ratio = plant_.gearbox.total_ratio(1);
  const std::vector<double> next{ctx.reference[0], ctx.reference[1]};
  const GradeProfile flat;
  const TrackingTorque tt =
      tracking_torque(ctx.state.speed, next, plant_.vehicle, plant_.motor, ratio, config_.ts,
                      ctx.grade != nullptr ? *ctx.grade : flat, ctx.state.position);
  Decision d;
  d.log = empty_stage_log();
  d.gear = 1;
  d.motor_torque = tt.torque.front() / ratio;
  d.log.clipped = tt.any_clipped();
  d.log.solve_time = seconds_since(t0);
  return d;
}

SmoothingSingleGear::SmoothingSingleGear(MpcConfig config, const Powertrain& models)
    : config_(std::move(config)), plant_(single_gear_powertrain(models)) {}

Decision SmoothingSingleGear::decide(const StepContext& ctx) {
  const auto t0 = Clock::now();
  const SmoothedPlan plan = solve_smoothing(smoothing_input(ctx, config_), plant_, config_.solver);
  Decision d;
  d.log = empty_stage_log();
  d.gear = 1;
  d.motor_torque = plan.torque.front() / plant_.gearbox.total_ratio(1);
  d.log.smoothing_objective = plan.objective;
  d.log.degraded = plan.degraded;
  d.log.solve_time = seconds_since(t0);
  return d;
}

void ShiftSchedule::validate() const {
  if (up.size() != down.size()) throw ValidationError("shift schedule needs one down threshold per up threshold");
  for (std::size_t i = 0; i < up.size(); ++i) {
    if (!(up[i] > 0)) throw ValidationError("shift thresholds must be positive");
    if (!(down[i] < up[i]) && !std::isinf(up[i]))
      throw ValidationError("down threshold must lie below its up threshold");
    if (i > 0 && !(up[i] > up[i - 1]) && !std::isinf(up[i]))
      throw ValidationError("up thresholds must increase with gear");
  }
  if (torque_slope < 0) throw ValidationError("shift schedule torque slope must be non-negative");
}

int ShiftSchedule::target_gear(int gear, double speed, double wheel_torque) const {
  const int n = gear_count();
  int target = std::clamp(gear, 1, n);
  const double lift = torque_slope * std::max(0.0, wheel_torque);
  while (target < n && speed >= up[static_cast<std::size_t>(target - 1)] + lift) ++target;
  while (target > 1 && speed < down[static_cast<std::size_t>(target - 2)]) --target;
  return target;
}

ShiftSchedule synthesize_shift_schedule(const MotorMap& map, const GearboxSpec& gearbox,
                                        const VehicleParams& params, double max_speed,
                                        double grid_step) {
  if (!(grid_step > 0) || !(max_speed > grid_step))
    throw ValidationError("shift schedule grid needs 0 < step < max speed");
  const int n = gearbox.gear_count();
  std::vector<double> speeds;
  std::vector<int> best;
  for (int i = 1; i * grid_step <= max_speed + 1e-12; ++i) {
    const double v = i * grid_step;
    const double torque = steady_state_torque(v, params);
    int arg = 0;
    double top = -kInf;
    for (int g = 1; g <= n; ++g) {
      const auto op = motor_operating_point(v, torque, g, gearbox, params);
      if (std::abs(op.torque) > max_motor_torque(op.speed, map)) continue;
      const double eta = motor_efficiency(op.speed, op.torque, map);
      if (eta > top) {
        top = eta;
        arg = g;
      }
    }
    speeds.push_back(v);
    best.push_back(arg);
  }
  if (std::all_of(best.begin(), best.end(), [&](int g) { return g == best.front(); }))
    throw DegenerateMap("gear " + std::to_string(best.front()) +
                        " is preferred at every cruise speed");

  ShiftSchedule s;
  for (int g = 1; g < n; ++g) {
    double threshold = kInf;
    for (std::size_t i = 0; i < speeds.size(); ++i) {
      if (best[i] > g) {
        threshold = speeds[i];
        break;
      }
    }
    if (!s.up.empty() && threshold <= s.up.back()) threshold = s.up.back() + grid_step;
    s.up.push_back(threshold);
    s.down.push_back((1.0 - kShiftHysteresis) * threshold);
  }
  s.validate();
  return s;
}

ShiftMapController::ShiftMapController(MpcConfig config, Powertrain models, ShiftSchedule schedule)
    : config_(std::move(config)), models_(std::move(models)), schedule_(std::move(schedule)) {
  schedule_.validate();
  if (schedule_.gear_count() != models_.gearbox.gear_count())
    throw ValidationError("shift schedule and gearbox differ in gear count");
}

Decision ShiftMapController::decide(const StepContext& ctx) {
  const auto t0 = Clock::now();
  const SmoothedPlan plan = solve_smoothing(smoothing_input(ctx, config_), models_, config_.solver);
  const double wheel = plan.torque.front();
  const int target = schedule_.target_gear(ctx.state.gear, ctx.state.speed, wheel);
  Decision d;
  d.log = empty_stage_log();
  d.gear = ctx.state.gear + (target > ctx.state.gear) - (target < ctx.state.gear);
  d.motor_torque = wheel / models_.gearbox.total_ratio(d.gear);
  d.log.smoothing_objective = plan.objective;
  d.log.degraded = plan.degraded;
  d.log.solve_time = seconds_since(t0);
  return d;
}

ReplayController::ReplayController(std::string name, Powertrain models, std::vector<int> gears,
                                   std::vector<double> wheel_torque)
    : name_(std::move(name)),
      models_(std::move(models)),
      gears_(std::move(gears)),
      wheel_torque_(std::move(wheel_torque)) {
  if (gears_.size() != wheel_torque_.size())
    throw ValidationError("replay gears and torques differ in length");
}

Decision ReplayController::decide(const StepContext& ctx) {
  if (ctx.step >= gears_.size()) throw ValidationError("replay trajectory is shorter than the cycle");
  Decision d;
  d.log = empty_stage_log();
  d.gear = gears_[ctx.step];
  d.motor_torque = wheel_torque_[ctx.step] / models_.gearbox.total_ratio(d.gear);
  return d;
}

void DrivingProfile::validate() const {
  if (wheel_torque.size() != speed.size() || soc.size() != speed.size())
    throw ValidationError("profile speed, torque and SoC traces differ in length");
  if (!(ts > 0)) throw ValidationError("profile sample period must be positive");
}

int GearTrajectory::shift_count(int start_gear) const {
  int count = 0;
  int prev = start_gear;
  for (int g : gears) {
    count += std::abs(g - prev);
    prev = g;
  }
  return count;
}

double gear_stage_cost(const DrivingProfile& profile, std::size_t step, int gear,
                       const Powertrain& models) {
  const auto op = motor_operating_point(profile.speed[step], profile.wheel_torque[step], gear,
                                        models.gearbox, models.vehicle);
  if (std::abs(op.torque) > max_motor_torque(op.speed, models.motor)) return kInf;
  const double pb = battery_power(op.speed, op.torque, models.motor, models.battery);
  try {
    return -profile.ts * soc_rate(pb, profile.soc[step], models.battery);
  } catch (const PowerLimitExceeded&) {
    return kInf;
  }
}

double gear_trajectory_cost(const DrivingProfile& profile, std::span<const int> gears,
                            const Powertrain& models) {
  if (gears.size() != profile.size()) throw ValidationError("gear trajectory and profile differ in length");
  double cost = 0.0;
  for (std::size_t k = 0; k < gears.size(); ++k) cost += gear_stage_cost(profile, k, gears[k], models);
  return cost;
}

GearTrajectory dp_gearshift(const DrivingProfile& profile, int start_gear, const Powertrain& models) {
  profile.validate();
  const int n = models.gearbox.gear_count();
  if (!models.gearbox.valid_gear(start_gear)) throw ValidationError("start gear out of range");
  const std::size_t len = profile.size();
  GearTrajectory out;
  if (len == 0) return out;

  const auto idx = [](int g) { return static_cast<std::size_t>(g - 1); };
  std::vector<std::vector<double>> stage(len, std::vector<double>(idx(n + 1)));
  for (std::size_t k = 0; k < len; ++k)
    for (int g = 1; g <= n; ++g) stage[k][idx(g)] = gear_stage_cost(profile, k, g, models);

  // Forward reachability names the first step no gear path can serve.
  std::vector<bool> reach(idx(n + 1), false);
  for (int g = std::max(1, start_gear - 1); g <= std::min(n, start_gear + 1); ++g)
    reach[idx(g)] = std::isfinite(stage[0][idx(g)]);
  for (std::size_t k = 0;; ++k) {
    if (std::none_of(reach.begin(), reach.end(), [](bool b) { return b; }))
      throw Infeasible("no feasible gear path reaches step " + std::to_string(k), k);
    if (k + 1 == len) break;
    std::vector<bool> next(reach.size(), false);
    for (int g = 1; g <= n; ++g) {
      if (!reach[idx(g)]) continue;
      for (int h = std::max(1, g - 1); h <= std::min(n, g + 1); ++h)
        if (std::isfinite(stage[k + 1][idx(h)])) next[idx(h)] = true;
    }
    reach = std::move(next);
  }

  // value[k][g]: cost-to-go including step k; shifts[k][g]: shifts after step k.
  std::vector<std::vector<double>> value(len, std::vector<double>(idx(n + 1), kInf));
  std::vector<std::vector<int>> shifts(len, std::vector<int>(idx(n + 1), 0));
  std::vector<std::vector<int>> choice(len, std::vector<int>(idx(n + 1), 0));
  for (std::size_t kk = len; kk-- > 0;) {
    for (int g = 1; g <= n; ++g) {
      const double c = stage[kk][idx(g)];
      if (!std::isfinite(c)) continue;
      if (kk + 1 == len) {
        value[kk][idx(g)] = c;
        continue;
      }
      int pick = 0;
      auto key = std::make_tuple(kInf, 0, 0);
      for (int h = std::max(1, g - 1); h <= std::min(n, g + 1); ++h) {
        const double v = value[kk + 1][idx(h)];
        if (!std::isfinite(v)) continue;
        const auto cand = std::make_tuple(v, shifts[kk + 1][idx(h)] + std::abs(h - g), h);
        if (pick == 0 || cand < key) {
          key = cand;
          pick = h;
        }
      }
      if (pick == 0) continue;
      value[kk][idx(g)] = c + std::get<0>(key);
      shifts[kk][idx(g)] = std::get<1>(key);
      choice[kk][idx(g)] = pick;
    }
  }

  int g = 0;
  auto key = std::make_tuple(kInf, 0, 0);
  for (int h = std::max(1, start_gear - 1); h <= std::min(n, start_gear + 1); ++h) {
    const double v = value[0][idx(h)];
    if (!std::isfinite(v)) continue;
    const auto cand = std::make_tuple(v, shifts[0][idx(h)] + std::abs(h - start_gear), h);
    if (g == 0 || cand < key) {
      key = cand;
      g = h;
    }
  }
  out.cost = std::get<0>(key);
  out.gears.reserve(len);
  for (std::size_t k = 0; k < len; ++k) {
    out.gears.push_back(g);
    g = choice[k][idx(g)];
  }
  return out;
}

RunResult smoothing_profile_run(const Scenario& scenario, const MpcConfig& config,
                                const Powertrain& models) {
  Scenario first = scenario;
  first.initial_state.gear = 1;
  HeldGearSmoothing controller(config, models);
  return simulate(first, config, controller);
}

DrivingProfile profile_from_run(const RunResult& run, double ts) {
  DrivingProfile p;
  p.ts = ts;
  for (std::size_t k = 0; k + 1 < run.log.size(); ++k) {
    p.speed.push_back(run.log[k].speed);
    p.wheel_torque.push_back(run.log[k].wheel_torque);
    p.soc.push_back(run.log[k].soc);
  }
  return p;
}

RunResult run_exact_tracking(const Scenario& scenario, const MpcConfig& config,
                             const Powertrain& models) {
  ExactTracking controller(config, models);
  return simulate(scenario, config, controller);
}

RunResult run_smoothing_single_gear(const Scenario& scenario, const MpcConfig& config,
                                    const Powertrain& models) {
  SmoothingSingleGear controller(config, models);
  return simulate(scenario, config, controller);
}

RunResult run_shift_map(const Scenario& scenario, const MpcConfig& config, const Powertrain& models,
                        const ShiftSchedule& schedule) {
  ShiftMapController controller(config, models, schedule);
  return simulate(scenario, config, controller);
}

RunResult run_co_optimization(const Scenario& scenario, const MpcConfig& config,
                              const Powertrain& models) {
  HierarchicalMpc controller(config, models);
  return simulate(scenario, config, controller);
}

RunResult run_dp_separate(const Scenario& scenario, const MpcConfig& config,
                          const Powertrain& models) {
  const auto t0 = Clock::now();
  const RunResult base = smoothing_profile_run(scenario, config, models);
  DrivingProfile profile = profile_from_run(base, config.ts);
  const int start = start_gear(scenario, models);
  RunResult result;
  for (int pass = 0; pass < 2; ++pass) {
    const GearTrajectory traj = dp_gearshift(profile, start, models);
    ReplayController controller("dp-separate", models, traj.gears, profile.wheel_torque);
    result = simulate(scenario, config, controller);
    for (std::size_t k = 0; k < profile.size(); ++k) profile.soc[k] = result.log[k].soc;
  }
  // Offline planning time is spread over the replayed steps.
  const double per_step = seconds_since(t0) / static_cast<double>(std::max<std::size_t>(1, profile.size()));
  for (std::size_t k = 0; k < profile.size(); ++k) result.log[k].solve_time = per_step;
  result.mean_solve_time = per_step;
  result.max_solve_time = per_step;
  return result;
}

}  // namespace evco
