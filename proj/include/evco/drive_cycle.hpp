#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "evco/powertrain.hpp"

namespace evco {

/// Uniformly sampled reference speed trace of the leader vehicle.
struct DriveCycle {
  std::string name;
  double ts = 1.0;             // s
  std::vector<double> speeds;  // m/s

  std::size_t size() const { return speeds.size(); }
  double duration() const { return ts * static_cast<double>(speeds.size() - 1); }

  /// Throws ValidationError unless every speed lies in [0, max_speed] and the
  /// trace has at least two samples.
  void validate(double max_speed) const;
};

/// Time-headway band on the gap to the leader:
///   tau_min (v + delta) <= gap <= tau_max (v + delta).
struct HeadwayParams {
  double tau_min = 1.0;  // s
  double tau_max = 2.0;  // s
  double delta = 5.0;    // m/s

  double lower(double speed) const { return tau_min * (speed + delta); }
  double upper(double speed) const { return tau_max * (speed + delta); }
  double midpoint(double speed) const { return 0.5 * (lower(speed) + upper(speed)); }
};

/// Piecewise-constant road grade over travelled distance (rad). Empty means flat.
struct GradeProfile {
  /// (start position m, grade rad), sorted by start position.
  std::vector<std::pair<double, double>> segments;

  double at(double position) const;
};

/// Additive offset on the speed preview the controller sees over
/// [first_step, last_step]; the leader itself still follows the nominal cycle.
struct PreviewDisturbance {
  std::size_t first_step = 0;
  std::size_t last_step = 0;
  double offset = 0.0;  // m/s

  bool active(std::size_t step) const { return offset != 0.0 && step >= first_step && step <= last_step; }
};

struct Scenario {
  DriveCycle cycle;
  double initial_gap = 0.0;  // m, leader position minus ego position at t = 0
  VehicleState initial_state;
  GradeProfile grade;
  PreviewDisturbance disturbance;

  /// Throws ValidationError when the initial gap is outside the headway band.
  void validate(const HeadwayParams& headway, double max_speed) const;
};

/// Scenario starting at the cycle's first reference speed, SoC 0.8, first gear,
/// with the gap at the middle of the headway band.
Scenario make_scenario(DriveCycle cycle, const HeadwayParams& headway = {});

/// Parses the `t,v` CSV format. The header line is optional and lines starting
/// with '#' are ignored. Resamples by linear interpolation when the source
/// period differs from `expected_ts`.
DriveCycle parse_cycle(std::istream& in, double expected_ts, std::string name);
DriveCycle load_cycle(const std::filesystem::path& path, double expected_ts);
void write_cycle(std::ostream& out, const DriveCycle& cycle);

/// Leader positions s_k = gap + ts * sum_{j<k} v_j for k = 0..size-1.
std::vector<double> leader_position(const DriveCycle& cycle, double initial_gap);

/// Reference speeds v_k..v_{k+n}, holding the final sample past the end.
std::vector<double> preview(const DriveCycle& cycle, std::size_t k, std::size_t n);

/// Same constant-hold rule applied to an arbitrary per-step trace.
std::vector<double> preview(const std::vector<double>& trace, std::size_t k, std::size_t n);

struct BuiltinCycles {
  DriveCycle urban;
  DriveCycle highway;
};

/// Seconds of initial acceleration on the highway cycle before the
/// 60 km/h floor applies.
inline constexpr double kHighwayWarmup = 40.0;

/// Deterministic synthetic urban (stop-and-go, <= 60 km/h) and highway
/// (60-110 km/h) cycles sampled at 1 Hz. Seed 0 gives the reference pair;
/// other seeds draw different jitter and trip layouts.
BuiltinCycles synthesize_cycles(std::uint64_t seed = 0);

/// "urban" or "highway"; throws ValidationError otherwise.
DriveCycle builtin_cycle(std::string_view name, std::uint64_t seed = 0);

}  // namespace evco
