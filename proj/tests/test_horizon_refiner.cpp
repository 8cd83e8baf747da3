#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "evco/errors.hpp"
#include "evco/horizon_refiner.hpp"
#include "oracles.hpp"

using namespace evco;

namespace {

const Powertrain kModels{};

RefinementInput refinement_input(double v, std::vector<double> reference) {
  RefinementInput in;
  in.speed = v;
  in.reference = std::move(reference);
  double s = in.headway.midpoint(v);
  for (double r : in.reference) {
    in.leader.push_back(s);
    s += r;
  }
  return in;
}

SmoothingInput as_smoothing(const RefinementInput& r) {
  SmoothingInput s;
  s.position = r.position;
  s.speed = r.speed;
  s.reference = r.reference;
  s.leader = r.leader;
  s.w2 = r.w2;
  s.w3 = r.w3;
  s.headway = r.headway;
  s.v_min = r.v_min;
  s.v_max = r.v_max;
  s.ts = r.ts;
  s.penalty_weight = r.penalty_weight;
  return s;
}

std::vector<double> warm_for(const RefinementInput& in, const GearSequence& gears) {
  SmoothingInput s = as_smoothing(in);
  s.previous_torque = in.previous_torque * kModels.gearbox.total_ratio(gears.gears[0]);
  const auto plan = solve_smoothing(s, kModels);
  return warm_start_torque(plan, gears, kModels);
}

}  // namespace

TEST(RefinedObjective, SingleGearMatchesSmoothingObjective) {
  Powertrain single = kModels;
  single.gearbox.ratios = {1.0};
  single.gearbox.final_drive = 7.2;
  const double g = 7.2;
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> ut(-40, 80), dv(-1.5, 1.5);
  for (int trial = 0; trial < 30; ++trial) {
    auto in = refinement_input(14, {14, 14 + dv(rng), 14 + dv(rng), 14 + dv(rng)});
    in.w1 = 0.0;
    in.previous_torque = 12.0;
    in.w3 = 0.7 * g * g;
    SmoothingInput s = as_smoothing(in);
    s.w3 = 0.7;
    s.previous_torque = in.previous_torque * g;
    std::vector<double> tm(3), tw(3);
    for (int i = 0; i < 3; ++i) {
      tm[static_cast<std::size_t>(i)] = ut(rng);
      tw[static_cast<std::size_t>(i)] = tm[static_cast<std::size_t>(i)] * g;
    }
    const double a = refined_objective(in, GearSequence::hold(1, 3), single, tm);
    const double b = smoothing_objective(s, single.vehicle, tw);
    EXPECT_NEAR(a, b, 1e-9 * (1 + std::abs(b)));
  }
}

TEST(RefinedObjective, HandEvaluationTwoSteps) {
  auto in = refinement_input(15, {15, 15.5, 16});
  in.previous_torque = 38.0;
  const auto gears = GearSequence::from_shifts(2, {0, 1});
  const std::vector<double> tm{40, 45};
  const auto& p = kModels.vehicle;
  const double ratio = kModels.gearbox.ratios[1] * kModels.gearbox.final_drive;

  double v = in.speed, soc = in.soc, prev = in.previous_torque, cost = 0.0;
  for (std::size_t i = 0; i < 2; ++i) {
    const double w = ratio * v / p.wheel_radius;
    const double eta = oracle::efficiency(w, tm[i], kModels.motor);
    const double pb = w * tm[i] / (kModels.battery.discharge_efficiency * eta);
    const double soc_next = oracle::iterate_soc(soc, {pb}, kModels.battery, in.ts);
    const double v_next = v + oracle::accel(v, tm[i] * ratio, p) * in.ts;
    cost += -in.w1 * (soc_next - soc) + in.w2 * std::pow(v_next - in.reference[i + 1], 2) +
            in.w3 * std::pow(tm[i] - prev, 2);
    v = v_next;
    soc = soc_next;
    prev = tm[i];
  }
  EXPECT_NEAR(refined_objective(in, gears, kModels, tm), cost, 1e-9 * std::abs(cost));
}

TEST(RefinedObjective, StandstillZeroTorque) {
  auto in = refinement_input(0, {0, 0, 0});
  in.previous_torque = 0.0;
  const std::vector<double> zero{0, 0};
  const auto r = rollout_motor_torque(in, GearSequence::hold(1, 2), kModels, zero);
  EXPECT_EQ(r.soc.back(), in.soc);
  EXPECT_EQ(refined_objective(in, GearSequence::hold(1, 2), kModels, zero), 0.0);
}

TEST(RefinedObjective, PackLimitIsInfinite) {
  auto in = refinement_input(30, {30, 30});
  in.soc = 0.2;
  Powertrain weak = kModels;
  weak.battery.v0 = 60.0;
  const std::vector<double> t{150};
  EXPECT_THROW(rollout_motor_torque(in, GearSequence::hold(1, 1), weak, t), PowerLimitExceeded);
  EXPECT_TRUE(std::isinf(refined_objective(in, GearSequence::hold(1, 1), weak, t)));
}

TEST(SolveRefined, WarmStartFixedPoint) {
  auto in = refinement_input(20, {20, 20.5, 21, 21, 20.5, 20});
  in.previous_torque = steady_state_torque(20, kModels.vehicle) / kModels.gearbox.total_ratio(3);
  const auto gears = GearSequence::hold(3, 5);
  const auto first = solve_refined(in, gears, kModels, warm_for(in, gears));
  const auto again = solve_refined(in, gears, kModels, first.torque);
  EXPECT_NEAR(again.warm_objective, first.objective, 1e-12 * (1 + std::abs(first.objective)));
  EXPECT_LE(again.objective, again.warm_objective);
  EXPECT_NEAR(again.objective, first.objective, 1e-6 * (1 + std::abs(first.objective)));
}

TEST(SolveRefined, SawtoothImprovesOnWarmStart) {
  auto in = refinement_input(20, {20, 21.5, 20, 21.5, 20, 21.5});
  in.previous_torque = steady_state_torque(20, kModels.vehicle) / kModels.gearbox.total_ratio(3);
  const auto gears = GearSequence::hold(3, 5);
  const auto sol = solve_refined(in, gears, kModels, warm_for(in, gears));
  EXPECT_LT(sol.objective, sol.warm_objective);
}

TEST(SolveRefined, DominantEnergyWeightRaisesTerminalSoc) {
  auto in = refinement_input(12, {12, 13, 14, 15, 16, 17});
  in.w1 = 2e5;
  in.w2 = 1e-3;
  in.w3 = 1e-3;
  in.previous_torque = steady_state_torque(12, kModels.vehicle) / kModels.gearbox.total_ratio(2);
  const auto gears = GearSequence::hold(2, 5);
  const auto warm = warm_for(in, gears);
  const auto sol = solve_refined(in, gears, kModels, warm);
  EXPECT_LT(sol.objective, sol.warm_objective);
  const auto warm_rollout = rollout_motor_torque(in, gears, kModels, warm);
  EXPECT_GT(sol.rollout.soc.back(), warm_rollout.soc.back());
}

TEST(SolveRefined, MonotoneConsistentAndBoxed) {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> uv(0.5, 30), dv(-2, 2), u01(0, 1);
  std::uniform_int_distribution<int> ug(1, 3);
  for (int trial = 0; trial < 60; ++trial) {
    const double v0 = uv(rng);
    std::vector<double> ref{v0};
    for (int i = 0; i < 5; ++i) ref.push_back(std::clamp(ref.back() + dv(rng), 0.0, 33.0));
    auto in = refinement_input(v0, ref);
    in.soc = 0.3 + 0.6 * u01(rng);
    const int g = ug(rng);
    in.previous_torque = steady_state_torque(v0, kModels.vehicle) / kModels.gearbox.total_ratio(g);
    const auto gears = GearSequence::hold(g, 5);
    const auto warm = warm_for(in, gears);
    const auto program = build_refined_program(in, gears, kModels, warm);
    const auto sol = solve_refined(in, gears, kModels, warm);
    EXPECT_LE(sol.objective, sol.warm_objective + 1e-9);
    EXPECT_EQ(sol.warm_objective, refined_objective(in, gears, kModels, program.project(warm)));
    EXPECT_TRUE(program.contains(sol.torque));
    if (sol.degraded) continue;
    VehicleState st{in.position, in.speed, in.soc, g};
    for (std::size_t i = 0; i < sol.torque.size(); ++i) {
      EXPECT_NEAR(sol.rollout.speed[i], st.speed, 1e-9);
      EXPECT_NEAR(sol.rollout.soc[i], st.soc, 1e-9);
      const double ratio = kModels.gearbox.total_ratio(g);
      const double pb = battery_power(ratio * st.speed / kModels.vehicle.wheel_radius, sol.torque[i],
                                      kModels.motor, kModels.battery);
      EXPECT_NEAR(sol.rollout.battery_power[i], pb, 1e-9 * (1 + std::abs(pb)));
      const double soc = step_soc(st.soc, pb, in.ts, kModels.battery).soc;
      st = step_vehicle(st, sol.torque[i] * ratio, in.ts, kModels.vehicle);
      st.soc = soc;
    }
    EXPECT_NEAR(sol.rollout.position.back(), st.position, 1e-9);
  }
}

TEST(WarmStart, DividesByGearRatio) {
  SmoothedPlan plan;
  plan.torque = {300, 300};
  plan.speed = {10, 10, 10};
  const auto seq = GearSequence::from_shifts(1, {1, 0});
  const auto t = warm_start_torque(plan, seq, kModels);
  EXPECT_DOUBLE_EQ(t[0], 300 / kModels.gearbox.total_ratio(1));
  EXPECT_DOUBLE_EQ(t[1], 300 / kModels.gearbox.total_ratio(2));
}
