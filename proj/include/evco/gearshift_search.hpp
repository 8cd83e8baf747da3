#pragma once

#include <vector>

#include "evco/powertrain.hpp"
#include "evco/speed_smoother.hpp"

namespace evco {

/// Shift signals over a horizon together with the gear trajectory they imply.
struct GearSequence {
  std::vector<int> shifts;  // N entries in {-1, 0, 1}
  std::vector<int> gears;   // N + 1 entries, gears[0] is the starting gear

  static GearSequence from_shifts(int start_gear, std::vector<int> shifts);
  static GearSequence hold(int gear, std::size_t horizon);

  std::size_t horizon() const { return shifts.size(); }
  int shift_count() const;
  /// Index of the first non-zero shift, horizon() if none.
  std::size_t first_shift() const;
  int final_gear() const { return gears.back(); }

  bool operator==(const GearSequence&) const = default;
};

/// Precomputed admissible gearshift sequences, one list per starting gear.
class AdmissibleSets {
public:
  AdmissibleSets(int horizon, int max_shifts, int gear_count);

  int horizon() const { return horizon_; }
  int max_shifts() const { return max_shifts_; }
  int gear_count() const { return gear_count_; }
  const std::vector<GearSequence>& from(int start_gear) const;

private:
  int horizon_;
  int max_shifts_;
  int gear_count_;
  std::vector<std::vector<GearSequence>> sets_;
};

/// Exhaustive, duplicate-free enumeration of no-skip sequences with at most
/// `max_shifts` non-zero signals that keep the gear in range.
AdmissibleSets build_admissible_sets(int horizon, int max_shifts, int gear_count);

/// Motor torque within the limit at every step of the plan under `seq`.
bool sequence_feasible(const GearSequence& seq, const SmoothedPlan& plan, const Powertrain& models);

/// Negative sum of motor efficiencies along the plan; lower is better.
double score_sequence(const GearSequence& seq, const SmoothedPlan& plan, const Powertrain& models);

struct GearSelection {
  GearSequence sequence;
  double score = 0.0;
  int feasible_count = 0;
};

/// Feasible sequence of minimal score. Ties go to fewer shifts, then a later
/// first shift, then a lower final gear, then the lexicographically smaller
/// gear vector. Throws AllInfeasible.
GearSelection select_gear_sequence(const AdmissibleSets& sets, int start_gear,
                                   const SmoothedPlan& plan, const Powertrain& models);

/// True if `a` ranks strictly before `b` under the tie-break keys alone.
bool tie_break_before(const GearSequence& a, const GearSequence& b);

}  // namespace evco
