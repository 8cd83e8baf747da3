#include "evco/drive_cycle.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include "evco/errors.hpp"

namespace evco {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

double parse_number(const std::string& field, std::size_t line) {
  std::size_t used = 0;
  double value = 0.0;
  try {
    value = std::stod(field, &used);
  } catch (const std::exception&) {
    throw ParseError("not a number: '" + field + "'", line);
  }
  if (used != field.size() || !std::isfinite(value))
    throw ParseError("not a number: '" + field + "'", line);
  return value;
}

// Uniform doubles built from raw engine bits; identical on every standard library.
class Uniform {
public:
  explicit Uniform(std::uint64_t seed) : engine_(seed) {}
  double operator()(double lo, double hi) {
    return lo + (hi - lo) * static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

private:
  std::mt19937_64 engine_;
};

constexpr double kKmh = 1.0 / 3.6;
constexpr std::uint64_t kSeedStride = 0x9e3779b97f4a7c15ULL;

DriveCycle make_urban(std::uint64_t seed) {
  Uniform rng(0x5eed0001 + seed * kSeedStride);
  const double cap = 60.0 * kKmh;
  std::vector<double> v{0.0};
  auto push = [&](double x) { v.push_back(std::clamp(x, 0.0, cap)); };

  while (v.size() < 590) {
    const int idle = 3 + static_cast<int>(rng(0.0, 10.0));
    for (int i = 0; i < idle; ++i) push(0.0);

    int legs = 1 + static_cast<int>(rng(0.0, 2.0));
    double speed = 0.0;
    while (legs-- > 0) {
      const double target = rng(22.0, 58.0) * kKmh;
      const double rate = rng(0.7, 1.3);
      while (std::abs(target - speed) > rate) {
        speed += target > speed ? rate : -rate;
        push(speed + rng(-0.3, 0.3));
      }
      speed = target;
      const int cruise = 8 + static_cast<int>(rng(0.0, 25.0));
      for (int i = 0; i < cruise; ++i) push(speed + rng(-0.7, 0.7));
    }
    const double brake = rng(0.7, 1.2);
    while (speed > brake) {
      speed -= brake;
      push(speed + rng(-0.2, 0.2));
    }
    push(0.0);
  }
  for (int i = 0; i < 5; ++i) push(0.0);
  return {"urban", 1.0, std::move(v)};
}

DriveCycle make_highway(std::uint64_t seed) {
  Uniform rng(0x5eed0002 + seed * kSeedStride);
  constexpr std::size_t kLength = 400;
  const double lo = 60.0 * kKmh;
  const double hi = 110.0 * kKmh;
  const double phase = rng(0.0, 2.0 * std::numbers::pi);
  auto base = [&](double t) {
    return (85.0 + 14.0 * std::sin(2.0 * std::numbers::pi * t / 130.0) +
            5.0 * std::sin(2.0 * std::numbers::pi * t / 37.0 + phase)) *
           kKmh;
  };
  const auto warmup = static_cast<std::size_t>(kHighwayWarmup);
  std::vector<double> v(kLength, 0.0);
  const double entry = base(kHighwayWarmup);
  for (std::size_t k = 0; k <= warmup; ++k) v[k] = entry * static_cast<double>(k) / kHighwayWarmup;
  for (std::size_t k = warmup + 1; k < kLength; ++k) {
    const double t = static_cast<double>(k);
    v[k] = std::clamp(base(t) + rng(-0.5, 0.5), lo, hi);
  }
  return {"highway", 1.0, std::move(v)};
}

}  // namespace

void DriveCycle::validate(double max_speed) const {
  if (speeds.size() < 2) throw ValidationError("cycle '" + name + "' needs at least two samples");
  if (!(ts > 0)) throw ValidationError("cycle '" + name + "' has non-positive sample period");
  for (std::size_t k = 0; k < speeds.size(); ++k) {
    if (!(speeds[k] >= 0.0) || speeds[k] > max_speed)
      throw ValidationError("cycle '" + name + "' speed out of range at sample " +
                            std::to_string(k));
  }
}

double GradeProfile::at(double position) const {
  double grade = 0.0;
  for (const auto& [start, value] : segments) {
    if (position < start) break;
    grade = value;
  }
  return grade;
}

void Scenario::validate(const HeadwayParams& headway, double max_speed) const {
  cycle.validate(max_speed);
  const double v0 = initial_state.speed;
  if (initial_gap < headway.lower(v0) || initial_gap > headway.upper(v0))
    throw ValidationError("initial gap " + std::to_string(initial_gap) +
                          " m is outside the headway band at the initial speed");
}

Scenario make_scenario(DriveCycle cycle, const HeadwayParams& headway) {
  Scenario s;
  s.initial_state.speed = cycle.speeds.empty() ? 0.0 : cycle.speeds.front();
  s.initial_gap = headway.midpoint(s.initial_state.speed);
  s.cycle = std::move(cycle);
  return s;
}

DriveCycle parse_cycle(std::istream& in, double expected_ts, std::string name) {
  if (!(expected_ts > 0)) throw ValidationError("expected sample period must be positive");
  std::vector<double> times;
  std::vector<double> values;
  std::string raw;
  std::size_t line_no = 0;
  bool seen_data = false;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    if (!seen_data && (line == "t,v" || line == "t, v")) {
      seen_data = true;
      continue;
    }
    seen_data = true;
    const auto comma = line.find(',');
    if (comma == std::string::npos || line.find(',', comma + 1) != std::string::npos)
      throw ParseError("expected two comma-separated fields", line_no);
    const double t = parse_number(trim(line.substr(0, comma)), line_no);
    const double v = parse_number(trim(line.substr(comma + 1)), line_no);
    if (v < 0.0) throw ValidationError("negative speed on line " + std::to_string(line_no));
    if (!times.empty() && t <= times.back())
      throw ValidationError("time is not strictly increasing on line " + std::to_string(line_no));
    times.push_back(t);
    values.push_back(v);
  }
  if (times.size() < 2) throw ValidationError("cycle '" + name + "' needs at least two samples");

  DriveCycle cycle{std::move(name), expected_ts, {}};
  const double t0 = times.front();
  const double span = times.back() - t0;
  bool uniform = true;
  for (std::size_t j = 0; j < times.size(); ++j) {
    if (std::abs(times[j] - t0 - expected_ts * static_cast<double>(j)) > 1e-9 * std::max(1.0, span)) {
      uniform = false;
      break;
    }
  }
  if (uniform) {
    cycle.speeds = std::move(values);
    return cycle;
  }

  const auto count = static_cast<std::size_t>(std::floor(span / expected_ts + 1e-9)) + 1;
  cycle.speeds.reserve(count);
  std::size_t j = 0;
  for (std::size_t k = 0; k < count; ++k) {
    const double t = t0 + expected_ts * static_cast<double>(k);
    while (j + 2 < times.size() && times[j + 1] < t) ++j;
    const double w = std::clamp((t - times[j]) / (times[j + 1] - times[j]), 0.0, 1.0);
    cycle.speeds.push_back(values[j] + w * (values[j + 1] - values[j]));
  }
  if (cycle.speeds.size() < 2) throw ValidationError("resampled cycle is shorter than two samples");
  return cycle;
}

DriveCycle load_cycle(const std::filesystem::path& path, double expected_ts) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open cycle file " + path.string());
  return parse_cycle(in, expected_ts, path.stem().string());
}

void write_cycle(std::ostream& out, const DriveCycle& cycle) {
  std::ostringstream buf;
  buf.precision(17);
  buf << "# " << cycle.name << "\n";
  buf << "t,v\n";
  for (std::size_t k = 0; k < cycle.speeds.size(); ++k)
    buf << cycle.ts * static_cast<double>(k) << ',' << cycle.speeds[k] << '\n';
  out << buf.str();
}

std::vector<double> leader_position(const DriveCycle& cycle, double initial_gap) {
  std::vector<double> s(cycle.speeds.size());
  double pos = initial_gap;
  for (std::size_t k = 0; k < s.size(); ++k) {
    s[k] = pos;
    pos += cycle.ts * cycle.speeds[k];
  }
  return s;
}

std::vector<double> preview(const std::vector<double>& trace, std::size_t k, std::size_t n) {
  std::vector<double> window(n + 1);
  const std::size_t last = trace.empty() ? 0 : trace.size() - 1;
  for (std::size_t i = 0; i <= n; ++i) window[i] = trace.empty() ? 0.0 : trace[std::min(k + i, last)];
  return window;
}

std::vector<double> preview(const DriveCycle& cycle, std::size_t k, std::size_t n) {
  return preview(cycle.speeds, k, n);
}

BuiltinCycles synthesize_cycles(std::uint64_t seed) { return {make_urban(seed), make_highway(seed)}; }

DriveCycle builtin_cycle(std::string_view name, std::uint64_t seed) {
  if (name == "urban") return make_urban(seed);
  if (name == "highway") return make_highway(seed);
  throw ValidationError("unknown builtin cycle '" + std::string(name) + "'");
}

}  // namespace evco
