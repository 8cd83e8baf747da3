#pragma once

#include <span>
#include <vector>

namespace evco {

/// Longitudinal vehicle parameters. Defaults are the mid-size BEV used
/// throughout the experiments.
struct VehicleParams {
  double mass = 1445.0;              // kg
  double wheel_radius = 0.3166;      // m
  double frontal_area = 2.06;        // m^2
  double drag_coefficient = 0.312;   // -
  double air_density = 1.2;          // kg/m^3
  double rolling_resistance = 0.0086;
  double gravity = 9.81;             // m/s^2

  /// Throws ValidationError if any field is out of range.
  void validate() const;
};

/// Multi-speed transmission. Gear positions are 1-based; ratios must
/// strictly decrease with gear position.
struct GearboxSpec {
  std::vector<double> ratios{3.05, 1.72, 0.92};
  double final_drive = 4.2;
  /// Aggregate ratio of the single-reduction baseline (already includes the
  /// final drive).
  double single_ratio = 7.2;

  int gear_count() const { return static_cast<int>(ratios.size()); }
  double ratio(int gear) const;
  /// ratio(gear) * final_drive.
  double total_ratio(int gear) const;
  /// Largest total ratio (first gear).
  double max_total_ratio() const { return total_ratio(1); }
  bool valid_gear(int gear) const { return gear >= 1 && gear <= gear_count(); }

  void validate() const;
};

/// Synthetic motor map. Peak torque follows min(T0, P0/w); losses are
///   P_loss = c0 + c1|w| + c2 w^2 + c3 T^2 + c4 |w|^3
/// and efficiency is P_mech / (P_mech + P_loss) floored at efficiency_floor.
///
/// The defaults put a single efficiency peak of 0.93 at (300 rad/s, 60 N m).
struct MotorMap {
  double stall_torque = 200.0;    // N m
  double corner_power = 60000.0;  // W
  double c0 = 100.0;              // W
  double c1 = 0.3;                // W s
  double c2 = 2.1935483870967674e-3;
  double c3 = 0.18817204301075252;
  double c4 = 1.074074074074074e-5;  // windage
  double efficiency_floor = 0.6;
  /// Uniform multiplier on the efficiency before flooring (1 for the physical
  /// map). Used to study argmin invariance of the gear search.
  double efficiency_scale = 1.0;

  double corner_speed() const { return corner_power / stall_torque; }
  void validate() const;
};

/// How motor efficiency enters the regenerating branch of the battery power.
/// `divide` uses omega T / (eta_b^- eta_m) for both branches; `multiply` uses
/// omega T eta_m / eta_b^- while regenerating.
enum class RegenModel { divide, multiply };

/// Battery pack with SoC-dependent open-circuit voltage and resistance:
///   Voc(SoC) = V0 (1 + kv (SoC - 0.5)),  Rb(SoC) = R0 (1 + kr (0.5 - SoC)).
struct BatteryPack {
  double capacity = 55.0 * 3600.0;  // A s
  double v0 = 350.0;                // V
  double kv = 0.1;
  double r0 = 0.1;                  // ohm
  double kr = 0.2;
  double discharge_efficiency = 0.9;  // eta_b^+ in (0, 1)
  double charge_efficiency = 1.11;    // eta_b^- > 1
  double soc_min = 0.1;
  double soc_max = 0.95;
  RegenModel regen = RegenModel::divide;

  double open_circuit_voltage(double soc) const { return v0 * (1.0 + kv * (soc - 0.5)); }
  double resistance(double soc) const { return r0 * (1.0 + kr * (0.5 - soc)); }
  /// Largest discharge power the pack can deliver at this SoC, Voc^2 / (4 Rb).
  double power_limit(double soc) const;

  void validate() const;
};

/// Full plant description shared by prediction models and the simulated plant.
struct Powertrain {
  VehicleParams vehicle;
  GearboxSpec gearbox;
  MotorMap motor;
  BatteryPack battery;

  void validate() const;
};

struct VehicleState {
  double position = 0.0;  // m
  double speed = 0.0;     // m/s
  double soc = 0.8;
  int gear = 1;
};

struct PowertrainCommand {
  double motor_torque = 0.0;  // N m
  int shift = 0;              // -1, 0, +1
  double brake_torque = 0.0;  // held at zero
};

struct OperatingPoint {
  double speed = 0.0;   // rad/s
  double torque = 0.0;  // N m
};

double wheel_torque(const PowertrainCommand& cmd, const GearboxSpec& gearbox, int gear);

/// dv/dt of the rolling vehicle. At standstill the resistive terms act as
/// static friction, so the result is never negative when v = 0.
double longitudinal_accel(double speed, double wheel_torque, const VehicleParams& params,
                          double grade = 0.0);

/// Wheel torque that holds `speed` constant (zero at standstill).
double steady_state_torque(double speed, const VehicleParams& params, double grade = 0.0);

/// Wheel torque whose Euler step from `speed` lands exactly on `target_speed`.
double inverse_dynamics_torque(double speed, double target_speed, double ts,
                               const VehicleParams& params, double grade = 0.0);

/// One explicit Euler step of position and speed. SoC and gear are copied.
VehicleState step_vehicle(const VehicleState& state, double wheel_torque, double ts,
                          const VehicleParams& params, double grade = 0.0);

OperatingPoint motor_operating_point(double speed, double wheel_torque, double total_ratio,
                                     double wheel_radius);
OperatingPoint motor_operating_point(double speed, double wheel_torque, int gear,
                                     const GearboxSpec& gearbox, const VehicleParams& params);

double max_motor_torque(double motor_speed, const MotorMap& map);
double motor_loss(double motor_speed, double torque, const MotorMap& map);
double motor_efficiency(double motor_speed, double torque, const MotorMap& map);

/// Electrical power drawn from the pack (negative while regenerating),
/// with an externally supplied motor efficiency.
double battery_power(double motor_speed, double motor_torque, double motor_eff,
                     const BatteryPack& pack);
double battery_power(double motor_speed, double motor_torque, const MotorMap& map,
                     const BatteryPack& pack);

/// dSoC/dt for explicit pack parameters. Throws PowerLimitExceeded when
/// Voc^2 < 4 Rb P_b.
double soc_rate(double battery_power_w, double ocv, double resistance, double capacity);
double soc_rate(double battery_power_w, double soc, const BatteryPack& pack);

struct SocStep {
  double soc = 0.0;
  bool clamped = false;
};

SocStep step_soc(double soc, double battery_power_w, double ts, const BatteryPack& pack);

/// SoC after applying `powers` one sample period each, re-evaluating Voc and
/// Rb at every predicted SoC. PowerLimitExceeded carries the step index.
double predict_soc_horizon(double soc, std::span<const double> powers, double ts,
                           const BatteryPack& pack);

}  // namespace evco
