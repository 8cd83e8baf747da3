#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "evco/baselines.hpp"
#include "evco/errors.hpp"
#include "harness.hpp"
#include "oracles.hpp"

using namespace evco;
using testing_support::constant_cycle;

namespace {

const Powertrain kModels{};
const MpcConfig kConfig{};

double rate_sum_sq(const RunResult& r) {
  double acc = 0.0;
  for (std::size_t k = 1; k + 1 < r.log.size(); ++k)
    acc += std::pow(r.log[k].wheel_torque - r.log[k - 1].wheel_torque, 2);
  return acc;
}

DrivingProfile random_profile(std::mt19937_64& rng, std::size_t len) {
  std::uniform_real_distribution<double> uv(0.0, 30.0), ut(-700, 700), us(0.3, 0.9), u01(0, 1);
  DrivingProfile p;
  for (std::size_t k = 0; k < len; ++k) {
    p.speed.push_back(uv(rng));
    p.wheel_torque.push_back(u01(rng) < 0.1 ? 0.0 : ut(rng));
    p.soc.push_back(us(rng));
  }
  return p;
}

ShiftSchedule manual_schedule() {
  ShiftSchedule s;
  s.up = {8.0, 15.0};
  s.down = {7.0, 14.0};
  return s;
}

}  // namespace

TEST(SingleGear, FoldsFinalDrive) {
  const auto p = single_gear_powertrain(kModels);
  ASSERT_EQ(p.gearbox.gear_count(), 1);
  EXPECT_DOUBLE_EQ(p.gearbox.total_ratio(1), 7.2);
}

TEST(ExactTracking, ConstantCruiseTorque) {
  const auto scenario = make_scenario(constant_cycle(20.0, 15));
  const auto r = run_exact_tracking(scenario, kConfig, kModels);
  for (std::size_t k = 0; k + 1 < r.log.size(); ++k) {
    EXPECT_NEAR(r.log[k].motor_torque, 12.14, 0.01);
    EXPECT_NEAR(r.log[k].motor_torque, oracle::steady_torque(20, kModels.vehicle) / 7.2, 1e-9);
    EXPECT_NEAR(r.log[k].speed, 20.0, 1e-9);
  }
  EXPECT_EQ(r.shift_count, 0);
}

TEST(ExactTracking, IdleCycleUsesNoCharge) {
  const auto r = run_exact_tracking(make_scenario(constant_cycle(0.0, 10)), kConfig, kModels);
  EXPECT_EQ(r.delta_soc, 0.0);
}

TEST(SmoothingSingleGear, SteadyCruiseMatchesBaseline) {
  const auto scenario = make_scenario(constant_cycle(20.0, 15));
  const auto a = run_exact_tracking(scenario, kConfig, kModels);
  const auto b = run_smoothing_single_gear(scenario, kConfig, kModels);
  for (std::size_t k = 0; k < a.log.size(); ++k) EXPECT_NEAR(a.log[k].motor_torque, b.log[k].motor_torque, 1e-6);
  EXPECT_NEAR(a.delta_soc, b.delta_soc, 1e-9);
}

TEST(SmoothingSingleGear, JitteryPreviewIsSmootherThanBaseline) {
  std::mt19937_64 rng(51);
  std::uniform_real_distribution<double> jitter(-1, 1);
  DriveCycle c = constant_cycle(15.0, 60, "jitter");
  for (std::size_t k = 1; k < c.size(); ++k) c.speeds[k] += jitter(rng);
  const auto scenario = make_scenario(c);
  const auto base = run_exact_tracking(scenario, kConfig, kModels);
  const auto smooth = run_smoothing_single_gear(scenario, kConfig, kModels);
  EXPECT_LT(rate_sum_sq(smooth), rate_sum_sq(base));
  const auto again = run_smoothing_single_gear(scenario, kConfig, kModels);
  EXPECT_EQ(again.delta_soc, smooth.delta_soc);
}

TEST(SmoothingSingleGear, BeatsBaselineOnUrban) {
  const auto scenario = make_scenario(builtin_cycle("urban"), kConfig.headway);
  EXPECT_LT(run_smoothing_single_gear(scenario, kConfig, kModels).delta_soc,
            run_exact_tracking(scenario, kConfig, kModels).delta_soc);
}

TEST(ShiftSchedule, TargetGearAndValidation) {
  const auto s = manual_schedule();
  EXPECT_NO_THROW(s.validate());
  EXPECT_EQ(s.target_gear(1, 5, 0), 1);
  EXPECT_EQ(s.target_gear(1, 8, 0), 2);
  EXPECT_EQ(s.target_gear(1, 16, 0), 3);
  EXPECT_EQ(s.target_gear(2, 7.5, 0), 2);
  EXPECT_EQ(s.target_gear(2, 6.9, 0), 1);
  EXPECT_EQ(s.target_gear(3, 14.5, 0), 3);
  ShiftSchedule lifted = s;
  lifted.torque_slope = 0.01;
  EXPECT_EQ(lifted.target_gear(1, 9, 200), 1);
  EXPECT_EQ(lifted.target_gear(1, 9, -200), 2);
  ShiftSchedule bad = s;
  bad.down[0] = 9.0;
  EXPECT_THROW(bad.validate(), ValidationError);
  bad = s;
  bad.up = {8.0, 6.0};
  bad.down = {7.0, 5.0};
  EXPECT_THROW(bad.validate(), ValidationError);
}

TEST(ShiftMap, StaysLowBelowThreshold) {
  const auto r = run_shift_map(make_scenario(constant_cycle(5.0, 30)), kConfig, kModels, manual_schedule());
  for (const auto& row : r.log) EXPECT_EQ(row.gear, 1);
  EXPECT_EQ(r.shift_count, 0);
}

TEST(ShiftMap, RampShiftsAtThresholds) {
  DriveCycle ramp;
  ramp.name = "ramp";
  for (int k = 0; k <= 40; ++k) ramp.speeds.push_back(std::min(20.0, 0.5 * k + 2.0));
  const auto r = run_shift_map(make_scenario(ramp), kConfig, kModels, manual_schedule());
  int last = 1;
  for (std::size_t k = 0; k < r.log.size(); ++k) {
    const int g = r.log[k].gear;
    EXPECT_GE(g, last);
    EXPECT_LE(g - last, 1);
    if (g == 2 && last == 1) {
      EXPECT_GE(r.log[k].speed, 8.0);
      EXPECT_LT(r.log[k - 1].speed, 8.0);
    }
    if (g == 3 && last == 2) {
      EXPECT_GE(r.log[k].speed, 15.0);
      EXPECT_LT(r.log[k - 1].speed, 15.0);
    }
    last = g;
  }
  EXPECT_EQ(r.log.back().gear, 3);
  EXPECT_EQ(r.shift_count, 2);
}

TEST(ShiftMap, NoShiftsInsideHysteresisBand) {
  DriveCycle c;
  c.name = "wobble";
  for (int k = 0; k < 60; ++k) c.speeds.push_back(7.5 + 0.2 * std::sin(0.7 * k));
  auto scenario = make_scenario(c);
  scenario.initial_state.gear = 2;
  const auto r = run_shift_map(scenario, kConfig, kModels, manual_schedule());
  EXPECT_EQ(r.shift_count, 0);
  for (const auto& row : r.log) EXPECT_EQ(row.gear, 2);
}

TEST(SynthesizeSchedule, ContrivedCrossover) {
  // Loss c2 w^2 + c3 T^2 only; two gears tie exactly where
  // c2 (v / r)^2 = c3 (T_w / (G1 G2))^2, placed at 15 m/s.
  const VehicleParams p;
  GearboxSpec gb;
  gb.ratios = {2.0, 1.0};
  gb.final_drive = 4.0;
  MotorMap map;
  map.c0 = map.c1 = map.c4 = 0.0;
  map.c3 = 0.1;
  const double tw = oracle::steady_torque(15.0, p);
  map.c2 = map.c3 * std::pow(tw * p.wheel_radius / (15.0 * 8.0 * 4.0), 2);
  map.efficiency_floor = 0.01;
  map.corner_power = 1e6;
  map.stall_torque = 1e4;
  const double step = 0.25;
  const auto s = synthesize_shift_schedule(map, gb, p, 120 / 3.6, step);
  ASSERT_EQ(s.up.size(), 1u);
  EXPECT_NEAR(s.up[0], 15.0, step + 1e-12);
  EXPECT_DOUBLE_EQ(s.down[0], 0.95 * s.up[0]);
}

TEST(SynthesizeSchedule, ConstantMapIsDegenerate) {
  MotorMap map;
  map.c0 = 1e12;
  EXPECT_THROW(synthesize_shift_schedule(map, GearboxSpec{}, VehicleParams{}), DegenerateMap);
}

TEST(SynthesizeSchedule, DefaultMapMatchesGridOracle) {
  const auto s = synthesize_shift_schedule(kModels.motor, kModels.gearbox, kModels.vehicle);
  ASSERT_EQ(s.up.size(), 2u);
  EXPECT_LT(s.up[0], s.up[1]);
  for (int i = 0; i < 2; ++i) EXPECT_LT(s.down[static_cast<std::size_t>(i)], s.up[static_cast<std::size_t>(i)]);

  const double step = 0.25;
  std::vector<double> first_above(2, INFINITY);
  for (int i = 1; i * step <= 120 / 3.6; ++i) {
    const double v = i * step, tw = oracle::steady_torque(v, kModels.vehicle);
    int best = 0;
    double top = -1;
    for (int g = 1; g <= 3; ++g) {
      const double ratio = kModels.gearbox.ratios[static_cast<std::size_t>(g - 1)] * kModels.gearbox.final_drive;
      const double eta = oracle::efficiency(ratio * v / kModels.vehicle.wheel_radius, tw / ratio, kModels.motor);
      if (eta > top) {
        top = eta;
        best = g;
      }
    }
    for (int g = 1; g <= 2; ++g)
      if (best > g && std::isinf(first_above[static_cast<std::size_t>(g - 1)])) first_above[static_cast<std::size_t>(g - 1)] = v;
  }
  EXPECT_DOUBLE_EQ(s.up[0], first_above[0]);
  EXPECT_GE(s.up[1], first_above[1]);
}

TEST(GearStageCost, MatchesModelEquations) {
  std::mt19937_64 rng(52);
  for (auto regen : {RegenModel::divide, RegenModel::multiply}) {
    Powertrain m = kModels;
    m.battery.regen = regen;
    const auto p = random_profile(rng, 200);
    for (std::size_t k = 0; k < p.size(); ++k)
      for (int g = 1; g <= 3; ++g) {
        const double want = oracle::stage_cost(p.speed[k], p.wheel_torque[k], p.soc[k], g, m, p.ts);
        const double got = gear_stage_cost(p, k, g, m);
        if (std::isinf(want)) EXPECT_TRUE(std::isinf(got));
        else EXPECT_NEAR(got, want, 1e-15 + 1e-12 * std::abs(want));
      }
  }
}

TEST(DpGearshift, SingleStep) {
  std::mt19937_64 rng(53);
  for (int trial = 0; trial < 50; ++trial) {
    const auto p = random_profile(rng, 1);
    for (int start = 1; start <= 3; ++start) {
      double best = INFINITY;
      for (int g = std::max(1, start - 1); g <= std::min(3, start + 1); ++g)
        best = std::min(best, gear_stage_cost(p, 0, g, kModels));
      if (std::isinf(best)) {
        EXPECT_THROW(dp_gearshift(p, start, kModels), Infeasible);
        continue;
      }
      const auto t = dp_gearshift(p, start, kModels);
      EXPECT_EQ(t.cost, best);
      EXPECT_LE(std::abs(t.gears[0] - start), 1);
    }
  }
}

TEST(DpGearshift, MatchesExhaustiveSearch) {
  std::mt19937_64 rng(54);
  std::uniform_int_distribution<int> ulen(1, 8), ug(1, 3);
  int checked = 0;
  for (int trial = 0; trial < 150; ++trial) {
    const auto p = random_profile(rng, static_cast<std::size_t>(ulen(rng)));
    const int start = ug(rng);
    const double expect = oracle::exhaustive_dp(p, start, kModels);
    if (std::isinf(expect)) {
      EXPECT_THROW(dp_gearshift(p, start, kModels), Infeasible);
      continue;
    }
    const auto t = dp_gearshift(p, start, kModels);
    EXPECT_NEAR(t.cost, expect, 1e-12 * std::abs(expect) + 1e-15);
    EXPECT_NEAR(gear_trajectory_cost(p, t.gears, kModels), t.cost, 1e-12 * std::abs(expect) + 1e-15);
    int prev = start;
    for (int g : t.gears) {
      EXPECT_LE(std::abs(g - prev), 1);
      prev = g;
    }
    ++checked;
  }
  EXPECT_GE(checked, 100);
}

TEST(DpGearshift, SweetSpotProfileStaysInFirstGear) {
  const double g1 = kModels.gearbox.total_ratio(1);
  DrivingProfile p;
  p.speed.assign(10, 300.0 * kModels.vehicle.wheel_radius / g1);
  p.wheel_torque.assign(10, 60.0 * g1);
  p.soc.assign(10, 0.8);
  const auto t = dp_gearshift(p, 1, kModels);
  EXPECT_EQ(t.gears, std::vector<int>(10, 1));
  EXPECT_EQ(t.shift_count(1), 0);
}

TEST(DpGearshift, ReportsInfeasibleStep) {
  DrivingProfile p;
  p.speed.assign(6, 5.0);
  p.wheel_torque.assign(6, 100.0);
  p.soc.assign(6, 0.8);
  p.wheel_torque[3] = 1.2 * kModels.motor.stall_torque * kModels.gearbox.total_ratio(1);
  try {
    dp_gearshift(p, 2, kModels);
    FAIL() << "expected Infeasible";
  } catch (const Infeasible& e) {
    EXPECT_EQ(e.step(), 3u);
  }
}

TEST(DpGearshift, NoWorseThanRandomTrajectories) {
  std::mt19937_64 rng(55);
  const auto p = random_profile(rng, 60);
  DrivingProfile light = p;
  for (auto& t : light.wheel_torque) t *= 0.3;
  const auto best = dp_gearshift(light, 2, kModels);
  std::uniform_int_distribution<int> step(-1, 1);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<int> gears;
    int g = 2;
    for (std::size_t k = 0; k < light.size(); ++k) {
      g = std::clamp(g + step(rng), 1, 3);
      gears.push_back(g);
    }
    EXPECT_LE(best.cost, gear_trajectory_cost(light, gears, kModels) + 1e-12);
  }
}

TEST(DpSeparate, ReplayMatchesPlan) {
  const auto scenario = make_scenario(builtin_cycle("urban"), kConfig.headway);
  const auto dp = run_dp_separate(scenario, kConfig, kModels);
  EXPECT_EQ(dp.controller, "dp-separate");
  EXPECT_EQ(dp.hard_violations, 0);
  EXPECT_NEAR(dp.delta_soc, 100.0 * (dp.log.front().soc - dp.log.back().soc), 1e-12);

  const auto profile = profile_from_run(smoothing_profile_run(scenario, kConfig, kModels), kConfig.ts);
  std::vector<int> gears;
  for (std::size_t k = 0; k + 1 < dp.log.size(); ++k) gears.push_back(dp.log[k].gear);
  ReplayController replay("replay", kModels, gears, profile.wheel_torque);
  const auto again = simulate(scenario, kConfig, replay);
  EXPECT_EQ(again.delta_soc, dp.delta_soc);
}

TEST(DpSeparate, NoWorseThanCoOptimizationGears) {
  const auto scenario = make_scenario(builtin_cycle("urban"), kConfig.headway);
  const auto co = run_co_optimization(scenario, kConfig, kModels);
  const auto profile = profile_from_run(co, kConfig.ts);
  std::vector<int> applied;
  for (std::size_t k = 0; k < profile.size(); ++k) applied.push_back(co.log[k].gear);
  const auto dp = dp_gearshift(profile, scenario.initial_state.gear, kModels);
  const double applied_cost = gear_trajectory_cost(profile, applied, kModels);
  EXPECT_LE(dp.cost, applied_cost + 1e-12 * std::abs(applied_cost));
}
