// Independent reference implementations used to check the library.
#pragma once

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <limits>
#include <random>
#include <tuple>
#include <vector>

#include "evco/baselines.hpp"
#include "evco/gearshift_search.hpp"
#include "evco/powertrain.hpp"
#include "evco/speed_smoother.hpp"

namespace oracle {

inline double accel(double v, double tw, const evco::VehicleParams& p) {
  return tw / (p.mass * p.wheel_radius) -
         p.air_density * p.frontal_area * p.drag_coefficient * v * v / (2.0 * p.mass) -
         p.rolling_resistance * p.gravity;
}

inline double steady_torque(double v, const evco::VehicleParams& p) {
  return (p.mass * p.gravity * p.rolling_resistance +
          0.5 * p.air_density * p.frontal_area * p.drag_coefficient * v * v) *
         p.wheel_radius;
}

inline double soc_rate(double pb, double voc, double rb, double cap) {
  return -(voc - std::sqrt(voc * voc - 4.0 * rb * pb)) / (2.0 * cap * rb);
}

/// Iterated one-step SoC update with the affine Voc/Rb curves written out.
inline double iterate_soc(double soc, const std::vector<double>& powers, const evco::BatteryPack& b,
                          double ts) {
  for (double p : powers) {
    const double voc = b.v0 * (1.0 + b.kv * (soc - 0.5));
    const double rb = b.r0 * (1.0 + b.kr * (0.5 - soc));
    soc += ts * soc_rate(p, voc, rb, b.capacity);
  }
  return soc;
}

inline double efficiency(double w, double t, const evco::MotorMap& m) {
  const double pm = std::abs(w * t);
  if (pm == 0.0) return m.efficiency_floor;
  const double aw = std::abs(w);
  const double loss = m.c0 + m.c1 * aw + m.c2 * aw * aw + m.c3 * t * t + m.c4 * aw * aw * aw;
  return std::max(m.efficiency_floor, m.efficiency_scale * pm / (pm + loss));
}

/// Number of admissible sequences from `gear` with `steps` shifts left to
/// choose and `budget` shifts still allowed.
inline long count_sequences(int gear, int steps, int budget, int gears) {
  if (steps == 0) return 1;
  long total = count_sequences(gear, steps - 1, budget, gears);
  if (budget > 0) {
    if (gear < gears) total += count_sequences(gear + 1, steps - 1, budget - 1, gears);
    if (gear > 1) total += count_sequences(gear - 1, steps - 1, budget - 1, gears);
  }
  return total;
}

/// All gear trajectories eta_0..eta_N over {1..gears}^(N+1), filtered to
/// start at `start`, never skip, and use at most `budget` shifts.
inline std::vector<std::vector<int>> filter_trajectories(int start, int n, int budget, int gears) {
  std::vector<std::vector<int>> out;
  long total = 1;
  for (int i = 0; i <= n; ++i) total *= gears;
  for (long code = 0; code < total; ++code) {
    std::vector<int> g(static_cast<std::size_t>(n + 1));
    long c = code;
    for (int i = 0; i <= n; ++i) {
      g[static_cast<std::size_t>(i)] = 1 + static_cast<int>(c % gears);
      c /= gears;
    }
    if (g[0] != start) continue;
    int used = 0;
    bool ok = true;
    for (int i = 0; i < n && ok; ++i) {
      const int d = std::abs(g[static_cast<std::size_t>(i + 1)] - g[static_cast<std::size_t>(i)]);
      ok = d <= 1;
      used += d;
    }
    if (ok && used <= budget) out.push_back(std::move(g));
  }
  return out;
}

/// Brute-force argmin of -sum eta over the filtered trajectories, with the
/// tie-break keys (shifts, -first shift, final gear).
inline std::vector<int> brute_force_gears(const evco::SmoothedPlan& plan, const evco::Powertrain& m,
                                          int start, int budget, bool* any_feasible = nullptr) {
  const int n = static_cast<int>(plan.torque.size());
  const int gears = m.gearbox.gear_count();
  std::vector<int> best;
  std::tuple<double, int, int, int, std::vector<int>> best_key{};
  for (const auto& g : filter_trajectories(start, n, budget, gears)) {
    double score = 0.0;
    bool ok = true;
    for (int i = 0; i < n; ++i) {
      const auto k = static_cast<std::size_t>(i);
      const double ratio = m.gearbox.ratios[static_cast<std::size_t>(g[k] - 1)] * m.gearbox.final_drive;
      const double w = ratio * plan.speed[k] / m.vehicle.wheel_radius;
      const double t = plan.torque[k] / ratio;
      if (std::abs(t) > evco::max_motor_torque(w, m.motor)) {
        ok = false;
        break;
      }
      score -= evco::motor_efficiency(w, t, m.motor);
    }
    if (!ok) continue;
    int shifts = 0;
    int first = n;
    for (int i = 0; i < n; ++i) {
      const int d = std::abs(g[static_cast<std::size_t>(i + 1)] - g[static_cast<std::size_t>(i)]);
      shifts += d;
      if (d != 0 && first == n) first = i;
    }
    auto key = std::make_tuple(score, shifts, -first, g.back(), g);
    if (best.empty() || key < best_key) {
      best = g;
      best_key = std::move(key);
    }
  }
  if (any_feasible != nullptr) *any_feasible = !best.empty();
  return best;
}

/// SoC decrement of one profile step, written from the model equations.
inline double stage_cost(double v, double tw, double soc, int gear, const evco::Powertrain& m, double ts) {
  const double ratio = m.gearbox.ratios[static_cast<std::size_t>(gear - 1)] * m.gearbox.final_drive;
  const double w = ratio * v / m.vehicle.wheel_radius;
  const double t = tw / ratio;
  if (std::abs(t) > evco::max_motor_torque(w, m.motor)) return std::numeric_limits<double>::infinity();
  const double eta = efficiency(w, t, m.motor);
  const double pm = w * t;
  double pb = 0.0;
  if (t >= 0) pb = pm / (m.battery.discharge_efficiency * eta);
  else if (m.battery.regen == evco::RegenModel::divide) pb = pm / (m.battery.charge_efficiency * eta);
  else pb = pm * eta / m.battery.charge_efficiency;
  const double voc = m.battery.v0 * (1.0 + m.battery.kv * (soc - 0.5));
  const double rb = m.battery.r0 * (1.0 + m.battery.kr * (0.5 - soc));
  if (voc * voc < 4.0 * rb * pb) return std::numeric_limits<double>::infinity();
  return -ts * soc_rate(pb, voc, rb, m.battery.capacity);
}

/// Minimum total cost over every no-skip gear path whose first gear is
/// within one position of `start`.
inline double exhaustive_dp(const evco::DrivingProfile& p, int start, const evco::Powertrain& m) {
  const int gears = m.gearbox.gear_count();
  double best = std::numeric_limits<double>::infinity();
  std::vector<int> path;
  auto rec = [&](auto&& self, std::size_t k, int prev, double acc) -> void {
    if (k == p.size()) {
      best = std::min(best, acc);
      return;
    }
    for (int g = std::max(1, prev - 1); g <= std::min(gears, prev + 1); ++g) {
      const double c = stage_cost(p.speed[k], p.wheel_torque[k], p.soc[k], g, m, p.ts);
      if (!std::isfinite(c)) continue;
      self(self, k + 1, g, acc + c);
    }
  };
  rec(rec, 0, start, 0.0);
  return best;
}

/// Random smoothed plan with speeds in [vlo, vhi] and torques in [-tmax, tmax].
inline evco::SmoothedPlan random_plan(std::mt19937_64& rng, int n, double vlo, double vhi, double tmax,
                                      double zero_prob = 0.15) {
  std::uniform_real_distribution<double> uv(vlo, vhi), ut(-tmax, tmax), u01(0.0, 1.0);
  evco::SmoothedPlan plan;
  for (int i = 0; i <= n; ++i) plan.speed.push_back(uv(rng));
  for (int i = 0; i < n; ++i) plan.torque.push_back(u01(rng) < zero_prob ? 0.0 : ut(rng));
  return plan;
}

}  // namespace oracle
