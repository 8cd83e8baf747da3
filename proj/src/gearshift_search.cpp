#include "evco/gearshift_search.hpp"

#include <cmath>
#include <cstdlib>
#include <string>

#include "evco/errors.hpp"

namespace evco {

namespace {

void extend(int gear_count, int budget, std::vector<int>& shifts, std::vector<int>& gears,
            std::size_t horizon, std::vector<GearSequence>& out) {
  if (shifts.size() == horizon) {
    out.push_back({shifts, gears});
    return;
  }
  for (int u : {0, 1, -1}) {
    const int next = gears.back() + u;
    if (next < 1 || next > gear_count) continue;
    if (u != 0 && budget == 0) continue;
    shifts.push_back(u);
    gears.push_back(next);
    extend(gear_count, budget - (u != 0 ? 1 : 0), shifts, gears, horizon, out);
    shifts.pop_back();
    gears.pop_back();
  }
}

struct StepTable {
  std::vector<std::vector<double>> efficiency;  // [step][gear - 1]
  std::vector<std::vector<bool>> feasible;
};

StepTable tabulate(const SmoothedPlan& plan, const Powertrain& models) {
  const std::size_t n = plan.torque.size();
  const int gears = models.gearbox.gear_count();
  StepTable t;
  t.efficiency.assign(n, std::vector<double>(static_cast<std::size_t>(gears)));
  t.feasible.assign(n, std::vector<bool>(static_cast<std::size_t>(gears)));
  for (std::size_t i = 0; i < n; ++i) {
    for (int g = 1; g <= gears; ++g) {
      const auto op = motor_operating_point(plan.speed[i], plan.torque[i], g, models.gearbox,
                                            models.vehicle);
      const auto k = static_cast<std::size_t>(g - 1);
      t.feasible[i][k] = std::abs(op.torque) <= max_motor_torque(op.speed, models.motor);
      t.efficiency[i][k] = motor_efficiency(op.speed, op.torque, models.motor);
    }
  }
  return t;
}

}  // namespace

GearSequence GearSequence::from_shifts(int start_gear, std::vector<int> shifts) {
  GearSequence seq;
  seq.gears.reserve(shifts.size() + 1);
  seq.gears.push_back(start_gear);
  for (int u : shifts) seq.gears.push_back(seq.gears.back() + u);
  seq.shifts = std::move(shifts);
  return seq;
}

GearSequence GearSequence::hold(int gear, std::size_t horizon) {
  return from_shifts(gear, std::vector<int>(horizon, 0));
}

int GearSequence::shift_count() const {
  int count = 0;
  for (int u : shifts) count += std::abs(u);
  return count;
}

std::size_t GearSequence::first_shift() const {
  for (std::size_t i = 0; i < shifts.size(); ++i)
    if (shifts[i] != 0) return i;
  return shifts.size();
}

AdmissibleSets::AdmissibleSets(int horizon, int max_shifts, int gear_count)
    : horizon_(horizon), max_shifts_(max_shifts), gear_count_(gear_count) {
  if (horizon < 1) throw ValidationError("horizon must be at least 1");
  if (max_shifts < 0) throw ValidationError("shift budget must be non-negative");
  if (gear_count < 1) throw ValidationError("gear count must be at least 1");
  sets_.resize(static_cast<std::size_t>(gear_count));
  for (int start = 1; start <= gear_count; ++start) {
    std::vector<int> shifts;
    std::vector<int> gears{start};
    extend(gear_count, max_shifts, shifts, gears, static_cast<std::size_t>(horizon),
           sets_[static_cast<std::size_t>(start - 1)]);
  }
}

const std::vector<GearSequence>& AdmissibleSets::from(int start_gear) const {
  if (start_gear < 1 || start_gear > gear_count_)
    throw ValidationError("start gear " + std::to_string(start_gear) + " out of range");
  return sets_[static_cast<std::size_t>(start_gear - 1)];
}

AdmissibleSets build_admissible_sets(int horizon, int max_shifts, int gear_count) {
  return AdmissibleSets(horizon, max_shifts, gear_count);
}

bool sequence_feasible(const GearSequence& seq, const SmoothedPlan& plan, const Powertrain& models) {
  for (std::size_t i = 0; i < plan.torque.size(); ++i) {
    const auto op = motor_operating_point(plan.speed[i], plan.torque[i], seq.gears[i],
                                          models.gearbox, models.vehicle);
    if (std::abs(op.torque) > max_motor_torque(op.speed, models.motor)) return false;
  }
  return true;
}

double score_sequence(const GearSequence& seq, const SmoothedPlan& plan, const Powertrain& models) {
  double score = 0.0;
  for (std::size_t i = 0; i < plan.torque.size(); ++i) {
    const auto op = motor_operating_point(plan.speed[i], plan.torque[i], seq.gears[i],
                                          models.gearbox, models.vehicle);
    score -= motor_efficiency(op.speed, op.torque, models.motor);
  }
  return score;
}

bool tie_break_before(const GearSequence& a, const GearSequence& b) {
  if (a.shift_count() != b.shift_count()) return a.shift_count() < b.shift_count();
  if (a.first_shift() != b.first_shift()) return a.first_shift() > b.first_shift();
  if (a.final_gear() != b.final_gear()) return a.final_gear() < b.final_gear();
  return a.gears < b.gears;
}

GearSelection select_gear_sequence(const AdmissibleSets& sets, int start_gear,
                                   const SmoothedPlan& plan, const Powertrain& models) {
  if (static_cast<std::size_t>(sets.horizon()) != plan.torque.size())
    throw ValidationError("admissible sets and plan differ in horizon");
  const StepTable table = tabulate(plan, models);
  GearSelection best;
  bool found = false;
  for (const GearSequence& seq : sets.from(start_gear)) {
    double score = 0.0;
    bool ok = true;
    for (std::size_t i = 0; i < plan.torque.size() && ok; ++i) {
      const auto k = static_cast<std::size_t>(seq.gears[i] - 1);
      ok = table.feasible[i][k];
      score -= table.efficiency[i][k];
    }
    if (!ok) continue;
    ++best.feasible_count;
    if (!found || score < best.score ||
        (score == best.score && tie_break_before(seq, best.sequence))) {
      best.sequence = seq;
      best.score = score;
      found = true;
    }
  }
  if (!found)
    throw AllInfeasible("no admissible gearshift sequence from gear " + std::to_string(start_gear) +
                        " meets the motor torque limit");
  return best;
}

}  // namespace evco
