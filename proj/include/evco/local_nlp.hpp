#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace evco {

/// A box-constrained smooth program. Constraints other than the box are
/// expected to be folded into the objective as quadratic penalties by the
/// builder (see speed_smoother.hpp / horizon_refiner.hpp).
struct SmoothProgram {
  std::vector<double> lower;
  std::vector<double> upper;
  std::function<double(std::span<const double>)> objective;

  std::size_t dimension() const { return lower.size(); }
  /// Throws ValidationError on mismatched sizes, inverted or non-finite bounds.
  void validate() const;
  bool contains(std::span<const double> x) const;
  std::vector<double> project(std::span<const double> x) const;
};

struct SolveSettings {
  int max_iterations = 100;
  double step_tolerance = 1e-7;       // relative
  double objective_tolerance = 1e-10; // relative
  double gradient_tolerance = 1e-6;   // relative to 1 + |f|
  /// Weight of one-sided quadratic soft-constraint penalties (per unit^2).
  double penalty_weight = 1e4;
};

struct SolveReport {
  std::vector<double> x;
  double objective = 0.0;
  double initial_objective = 0.0;
  bool converged = false;
  int iterations = 0;
  int evaluations = 0;
  double wall_time = 0.0;  // s
};

/// Central-difference gradient, falling back to one-sided differences at
/// active bounds.
std::vector<double> numerical_gradient(const SmoothProgram& program, std::span<const double> x,
                                       int* evaluations = nullptr);

/// Projected BFGS with an Armijo search along the projection arc.
///
/// Every accepted step strictly decreases the objective, so the returned
/// point is inside the box and never worse than x0. Hitting the iteration
/// limit yields the best iterate with converged = false. Throws
/// NonFiniteObjective if the objective is not finite at x0.
SolveReport minimize(const SmoothProgram& program, std::span<const double> x0,
                     const SolveSettings& settings = {});

}  // namespace evco
