#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace evco {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Demanded battery power exceeds what the pack can deliver (negative
/// discriminant in the SoC rate equation).
class PowerLimitExceeded : public Error {
public:
  PowerLimitExceeded(double power_w, double limit_w, std::ptrdiff_t step = -1);

  double power() const { return power_; }
  double limit() const { return limit_; }
  /// Index of the offending step inside a horizon prediction, -1 if not applicable.
  std::ptrdiff_t step() const { return step_; }

private:
  double power_;
  double limit_;
  std::ptrdiff_t step_;
};

class ParseError : public Error {
public:
  ParseError(const std::string& what, std::size_t line)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

private:
  std::size_t line_;
};

class ValidationError : public Error {
public:
  using Error::Error;
};

/// Experiment configuration problems, all collected before reporting.
class ConfigError : public Error {
public:
  explicit ConfigError(std::vector<std::string> violations);
  const std::vector<std::string>& violations() const { return violations_; }

private:
  std::vector<std::string> violations_;
};

/// The objective evaluated to NaN or infinity at the starting point.
class NonFiniteObjective : public Error {
public:
  using Error::Error;
};

/// No admissible gearshift sequence satisfies the motor torque limit.
class AllInfeasible : public Error {
public:
  using Error::Error;
};

/// No gear can deliver the demanded torque at some step of a full profile.
class Infeasible : public Error {
public:
  Infeasible(const std::string& what, std::size_t step) : Error(what), step_(step) {}
  std::size_t step() const { return step_; }

private:
  std::size_t step_;
};

/// A shift schedule cannot be derived because one gear is best everywhere.
class DegenerateMap : public Error {
public:
  using Error::Error;
};

/// Closed-loop simulation aborted (SoC hit a bound or the pack limit was exceeded).
class SimulationAborted : public Error {
public:
  SimulationAborted(const std::string& what, std::size_t step)
      : Error("step " + std::to_string(step) + ": " + what), step_(step) {}
  std::size_t step() const { return step_; }

private:
  std::size_t step_;
};

}  // namespace evco
