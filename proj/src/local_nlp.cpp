#include "evco/local_nlp.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include "evco/errors.hpp"

namespace evco {

namespace {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

constexpr double kArmijo = 1e-4;
constexpr int kMaxBacktracks = 40;

std::span<const double> view(const Vec& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

class Evaluator {
public:
  explicit Evaluator(const SmoothProgram& p) : program_(p) {}

  double value(const Vec& x) {
    ++count_;
    return program_.objective(view(x));
  }

  Vec gradient(const Vec& x) {
    int n = 0;
    const auto g = numerical_gradient(program_, view(x), &n);
    count_ += n;
    return Eigen::Map<const Vec>(g.data(), static_cast<Eigen::Index>(g.size()));
  }

  Vec project(const Vec& x) const {
    Vec p = x;
    for (Eigen::Index i = 0; i < p.size(); ++i)
      p[i] = std::clamp(p[i], program_.lower[static_cast<std::size_t>(i)],
                        program_.upper[static_cast<std::size_t>(i)]);
    return p;
  }

  // Variables pinned at a bound with the gradient pushing outward.
  std::vector<bool> pinned(const Vec& x, const Vec& g) const {
    std::vector<bool> out(static_cast<std::size_t>(x.size()), false);
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      const auto k = static_cast<std::size_t>(i);
      out[k] = (x[i] <= program_.lower[k] && g[i] > 0) || (x[i] >= program_.upper[k] && g[i] < 0);
    }
    return out;
  }

  int count() const { return count_; }

private:
  const SmoothProgram& program_;
  int count_ = 0;
};

}  // namespace

void SmoothProgram::validate() const {
  if (lower.size() != upper.size()) throw ValidationError("bound vectors differ in length");
  if (!objective) throw ValidationError("program has no objective");
  for (std::size_t i = 0; i < lower.size(); ++i) {
    if (!std::isfinite(lower[i]) || !std::isfinite(upper[i]) || lower[i] > upper[i])
      throw ValidationError("invalid bounds for variable " + std::to_string(i));
  }
}

bool SmoothProgram::contains(std::span<const double> x) const {
  if (x.size() != lower.size()) return false;
  for (std::size_t i = 0; i < x.size(); ++i)
    if (!(x[i] >= lower[i] && x[i] <= upper[i])) return false;
  return true;
}

std::vector<double> SmoothProgram::project(std::span<const double> x) const {
  std::vector<double> p(x.begin(), x.end());
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = std::clamp(p[i], lower[i], upper[i]);
  return p;
}

std::vector<double> numerical_gradient(const SmoothProgram& program, std::span<const double> x,
                                       int* evaluations) {
  const std::size_t n = x.size();
  std::vector<double> probe(x.begin(), x.end());
  std::vector<double> g(n, 0.0);
  const double base_step = std::cbrt(std::numeric_limits<double>::epsilon());
  double f0 = std::numeric_limits<double>::quiet_NaN();
  int evals = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double h = base_step * std::max(1.0, std::abs(x[i]));
    const bool room_up = x[i] + h <= program.upper[i];
    const bool room_down = x[i] - h >= program.lower[i];
    if (room_up && room_down) {
      probe[i] = x[i] + h;
      const double fp = program.objective(probe);
      probe[i] = x[i] - h;
      const double fm = program.objective(probe);
      evals += 2;
      g[i] = (fp - fm) / (2.0 * h);
    } else if (room_up || room_down) {
      if (std::isnan(f0)) {
        f0 = program.objective(x);
        ++evals;
      }
      const double sign = room_up ? 1.0 : -1.0;
      probe[i] = x[i] + sign * h;
      g[i] = sign * (program.objective(probe) - f0) / h;
      ++evals;
    }
    probe[i] = x[i];
  }
  if (evaluations != nullptr) *evaluations = evals;
  return g;
}

SolveReport minimize(const SmoothProgram& program, std::span<const double> x0,
                     const SolveSettings& settings) {
  program.validate();
  if (x0.size() != program.dimension()) throw ValidationError("x0 has the wrong dimension");
  const auto start = std::chrono::steady_clock::now();

  Evaluator eval(program);
  const auto n = static_cast<Eigen::Index>(x0.size());
  Vec x = eval.project(Eigen::Map<const Vec>(x0.data(), n));
  double f = eval.value(x);
  if (!std::isfinite(f)) throw NonFiniteObjective("objective is not finite at the initial point");

  SolveReport report;
  report.initial_objective = f;

  Mat inv_hessian = Mat::Identity(n, n);
  bool fresh_hessian = true;
  Vec g = n > 0 ? eval.gradient(x) : Vec{};
  int it = 0;
  bool converged = n == 0;

  while (!converged && it < settings.max_iterations) {
    ++it;
    const auto pin = eval.pinned(x, g);
    Vec free_g = g;
    for (Eigen::Index i = 0; i < n; ++i)
      if (pin[static_cast<std::size_t>(i)]) free_g[i] = 0.0;
    const double scale = 1.0 + std::abs(f);
    if (free_g.lpNorm<Eigen::Infinity>() * std::max(1.0, x.lpNorm<Eigen::Infinity>()) <=
        settings.gradient_tolerance * scale) {
      converged = true;
      break;
    }

    Vec d;
    if (fresh_hessian) {
      // First step: move at most ~10% of the current magnitude.
      const double reach = 0.1 * std::max(1.0, x.lpNorm<Eigen::Infinity>());
      d = -free_g * (reach / free_g.lpNorm<Eigen::Infinity>());
    } else {
      d = -(inv_hessian * free_g);
      for (Eigen::Index i = 0; i < n; ++i)
        if (pin[static_cast<std::size_t>(i)]) d[i] = 0.0;
      if (d.dot(free_g) >= 0.0) {
        inv_hessian.setIdentity();
        fresh_hessian = true;
        continue;
      }
    }

    double alpha = 1.0;
    bool accepted = false;
    Vec xt;
    double ft = f;
    for (int ls = 0; ls < kMaxBacktracks; ++ls, alpha *= 0.5) {
      xt = eval.project(x + alpha * d);
      const Vec step = xt - x;
      if (step.lpNorm<Eigen::Infinity>() == 0.0) break;
      ft = eval.value(xt);
      if (std::isfinite(ft) && ft < f && ft <= f + kArmijo * g.dot(step)) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      if (fresh_hessian) break;  // steepest descent stalled
      inv_hessian.setIdentity();
      fresh_hessian = true;
      continue;
    }

    const Vec s = xt - x;
    const Vec gt = eval.gradient(xt);
    const Vec y = gt - g;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      if (fresh_hessian) inv_hessian = Mat::Identity(n, n) * (sy / y.squaredNorm());
      const double rho = 1.0 / sy;
      const Mat eye = Mat::Identity(n, n);
      inv_hessian = (eye - rho * s * y.transpose()) * inv_hessian * (eye - rho * y * s.transpose()) +
                    rho * s * s.transpose();
      fresh_hessian = false;
    }

    const double drop = f - ft;
    const double move = s.lpNorm<Eigen::Infinity>();
    x = xt;
    g = gt;
    f = ft;
    if (drop <= settings.objective_tolerance * (1.0 + std::abs(f)) &&
        move <= settings.step_tolerance * (1.0 + x.lpNorm<Eigen::Infinity>()))
      converged = true;
  }

  if (!converged && it < settings.max_iterations) converged = true;  // stalled at a stationary point

  report.x.assign(x.data(), x.data() + n);
  report.objective = f;
  report.converged = converged;
  report.iterations = it;
  report.evaluations = eval.count();
  report.wall_time =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

}  // namespace evco
