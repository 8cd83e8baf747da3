#include "evco/powertrain.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "evco/errors.hpp"

namespace evco {

namespace {

constexpr double kMinMotorSpeed = 1e-6;  // rad/s, guards P0/w at standstill

void require(bool ok, const std::string& what) {
  if (!ok) throw ValidationError(what);
}

}  // namespace

PowerLimitExceeded::PowerLimitExceeded(double power_w, double limit_w, std::ptrdiff_t step)
    : Error("battery power " + std::to_string(power_w) + " W exceeds pack limit " +
            std::to_string(limit_w) + " W" +
            (step >= 0 ? " at horizon step " + std::to_string(step) : std::string{})),
      power_(power_w),
      limit_(limit_w),
      step_(step) {}

void VehicleParams::validate() const {
  require(mass > 0, "vehicle.mass must be positive");
  require(wheel_radius > 0, "vehicle.wheel_radius must be positive");
  require(frontal_area > 0, "vehicle.frontal_area must be positive");
  require(drag_coefficient > 0 && drag_coefficient < 2,
          "vehicle.drag_coefficient must lie in (0, 2)");
  require(air_density > 0, "vehicle.air_density must be positive");
  require(rolling_resistance > 0 && rolling_resistance < 0.1,
          "vehicle.rolling_resistance must lie in (0, 0.1)");
  require(gravity > 0, "vehicle.gravity must be positive");
}

double GearboxSpec::ratio(int gear) const {
  if (!valid_gear(gear)) throw ValidationError("gear " + std::to_string(gear) + " out of range");
  return ratios[static_cast<std::size_t>(gear - 1)];
}

double GearboxSpec::total_ratio(int gear) const { return ratio(gear) * final_drive; }

void GearboxSpec::validate() const {
  require(!ratios.empty(), "gearbox needs at least one gear");
  for (std::size_t i = 0; i < ratios.size(); ++i) {
    require(ratios[i] > 0, "gearbox ratios must be positive");
    if (i > 0) require(ratios[i] < ratios[i - 1], "gearbox ratios must strictly decrease");
  }
  require(final_drive > 0, "gearbox.final_drive must be positive");
  require(single_ratio > 0, "gearbox.single_ratio must be positive");
}

void MotorMap::validate() const {
  require(stall_torque > 0, "motor.stall_torque must be positive");
  require(corner_power > 0, "motor.corner_power must be positive");
  require(c0 >= 0 && c1 >= 0 && c2 >= 0 && c3 >= 0 && c4 >= 0,
          "motor loss coefficients must be non-negative");
  require(efficiency_floor > 0 && efficiency_floor < 1, "motor.efficiency_floor must lie in (0, 1)");
  require(efficiency_scale > 0 && efficiency_scale <= 1, "motor.efficiency_scale must lie in (0, 1]");
}

double BatteryPack::power_limit(double soc) const {
  const double voc = open_circuit_voltage(soc);
  return voc * voc / (4.0 * resistance(soc));
}

void BatteryPack::validate() const {
  require(capacity > 0, "battery.capacity must be positive");
  require(v0 > 0 && std::abs(kv) < 2, "battery open-circuit voltage must stay positive on [0, 1]");
  require(r0 > 0 && std::abs(kr) < 2, "battery resistance must stay positive on [0, 1]");
  require(discharge_efficiency > 0 && discharge_efficiency < 1,
          "battery.discharge_efficiency must lie in (0, 1)");
  require(charge_efficiency > 1, "battery.charge_efficiency must exceed 1");
  require(soc_min >= 0 && soc_min < soc_max && soc_max <= 1,
          "battery SoC bounds must satisfy 0 <= soc_min < soc_max <= 1");
}

void Powertrain::validate() const {
  vehicle.validate();
  gearbox.validate();
  motor.validate();
  battery.validate();
}

double wheel_torque(const PowertrainCommand& cmd, const GearboxSpec& gearbox, int gear) {
  return cmd.motor_torque * gearbox.ratio(gear) * gearbox.final_drive - cmd.brake_torque;
}

double longitudinal_accel(double speed, double wheel_torque, const VehicleParams& p,
                          double grade) {
  const double drive = wheel_torque / (p.mass * p.wheel_radius);
  const double slope = p.gravity * std::sin(grade);
  const double rolling = p.rolling_resistance * p.gravity * std::cos(grade);
  if (speed <= 0.0) {
    // Static friction: no motion unless the drive overcomes slope and rolling.
    return std::max(0.0, drive - slope - rolling);
  }
  const double drag = p.air_density * p.frontal_area * p.drag_coefficient * speed * speed /
                      (2.0 * p.mass);
  return drive - drag - slope - rolling;
}

double steady_state_torque(double speed, const VehicleParams& p, double grade) {
  if (speed <= 0.0) return 0.0;
  const double resist = p.air_density * p.frontal_area * p.drag_coefficient * speed * speed /
                            (2.0 * p.mass) +
                        p.gravity * std::sin(grade) +
                        p.rolling_resistance * p.gravity * std::cos(grade);
  return resist * p.mass * p.wheel_radius;
}

double inverse_dynamics_torque(double speed, double target_speed, double ts,
                               const VehicleParams& p, double grade) {
  const double accel = (target_speed - speed) / ts;
  if (speed <= 0.0 && target_speed <= 0.0) return 0.0;
  if (speed <= 0.0) {
    const double resist =
        p.gravity * std::sin(grade) + p.rolling_resistance * p.gravity * std::cos(grade);
    return (accel + resist) * p.mass * p.wheel_radius;
  }
  return steady_state_torque(speed, p, grade) + accel * p.mass * p.wheel_radius;
}

VehicleState step_vehicle(const VehicleState& state, double wheel_torque, double ts,
                          const VehicleParams& params, double grade) {
  VehicleState next = state;
  next.position = state.position + state.speed * ts;
  next.speed =
      std::max(0.0, state.speed + longitudinal_accel(state.speed, wheel_torque, params, grade) * ts);
  return next;
}

OperatingPoint motor_operating_point(double speed, double wheel_torque, double total_ratio,
                                     double wheel_radius) {
  return {total_ratio * speed / wheel_radius, wheel_torque / total_ratio};
}

OperatingPoint motor_operating_point(double speed, double wheel_torque, int gear,
                                     const GearboxSpec& gearbox, const VehicleParams& params) {
  return motor_operating_point(speed, wheel_torque, gearbox.total_ratio(gear),
                               params.wheel_radius);
}

double max_motor_torque(double motor_speed, const MotorMap& map) {
  return std::min(map.stall_torque, map.corner_power / std::max(motor_speed, kMinMotorSpeed));
}

double motor_loss(double motor_speed, double torque, const MotorMap& map) {
  const double w = std::abs(motor_speed);
  return map.c0 + map.c1 * w + map.c2 * w * w + map.c3 * torque * torque + map.c4 * w * w * w;
}

double motor_efficiency(double motor_speed, double torque, const MotorMap& map) {
  const double mech = std::abs(motor_speed * torque);
  double eta = map.efficiency_floor;
  if (mech > 0.0) eta = std::max(eta, mech / (mech + motor_loss(motor_speed, torque, map)));
  return map.efficiency_scale * eta;
}

double battery_power(double motor_speed, double motor_torque, double motor_eff,
                     const BatteryPack& pack) {
  const double mech = motor_speed * motor_torque;
  if (motor_torque >= 0.0) return mech / (pack.discharge_efficiency * motor_eff);
  if (pack.regen == RegenModel::multiply) return mech * motor_eff / pack.charge_efficiency;
  return mech / (pack.charge_efficiency * motor_eff);
}

double battery_power(double motor_speed, double motor_torque, const MotorMap& map,
                     const BatteryPack& pack) {
  return battery_power(motor_speed, motor_torque, motor_efficiency(motor_speed, motor_torque, map),
                       pack);
}

double soc_rate(double battery_power_w, double ocv, double resistance, double capacity) {
  const double disc = ocv * ocv - 4.0 * resistance * battery_power_w;
  if (disc < 0.0) throw PowerLimitExceeded(battery_power_w, ocv * ocv / (4.0 * resistance));
  return -(ocv - std::sqrt(disc)) / (2.0 * capacity * resistance);
}

double soc_rate(double battery_power_w, double soc, const BatteryPack& pack) {
  return soc_rate(battery_power_w, pack.open_circuit_voltage(soc), pack.resistance(soc),
                  pack.capacity);
}

SocStep step_soc(double soc, double battery_power_w, double ts, const BatteryPack& pack) {
  const double next = soc + soc_rate(battery_power_w, soc, pack) * ts;
  const double clamped = std::clamp(next, pack.soc_min, pack.soc_max);
  return {clamped, clamped != next};
}

double predict_soc_horizon(double soc, std::span<const double> powers, double ts,
                           const BatteryPack& pack) {
  for (std::size_t i = 0; i < powers.size(); ++i) {
    try {
      soc = step_soc(soc, powers[i], ts, pack).soc;
    } catch (const PowerLimitExceeded& e) {
      throw PowerLimitExceeded(e.power(), e.limit(), static_cast<std::ptrdiff_t>(i));
    }
  }
  return soc;
}

}  // namespace evco
