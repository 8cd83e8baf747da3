#include "evco/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <map>
#include <mutex>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "evco/baselines.hpp"
#include "evco/errors.hpp"

namespace evco {

namespace pt = boost::property_tree;

namespace {

constexpr double kKmh = 1.0 / 3.6;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

/// Typed reads from one INI section, collecting problems instead of throwing.
class Section {
public:
  Section(const pt::ptree* tree, std::string name, std::vector<std::string>& errors)
      : tree_(tree), name_(std::move(name)), errors_(errors) {}

  void number(const std::string& key, double& out) {
    if (auto raw = text(key)) {
      try {
        std::size_t used = 0;
        const double v = std::stod(*raw, &used);
        if (used != raw->size()) throw std::invalid_argument("trailing characters");
        out = v;
      } catch (const std::exception&) {
        errors_.push_back(name_ + "." + key + ": '" + *raw + "' is not a number");
      }
    }
  }

  void integer(const std::string& key, int& out) {
    double v = out;
    number(key, v);
    if (v != std::floor(v)) {
      errors_.push_back(name_ + "." + key + ": expected an integer");
      return;
    }
    out = static_cast<int>(v);
  }

  void numbers(const std::string& key, std::vector<double>& out) {
    if (auto raw = text(key)) {
      std::vector<double> values;
      for (const auto& item : split_list(*raw)) {
        try {
          values.push_back(std::stod(item));
        } catch (const std::exception&) {
          errors_.push_back(name_ + "." + key + ": '" + item + "' is not a number");
          return;
        }
      }
      out = std::move(values);
    }
  }

  void words(const std::string& key, std::vector<std::string>& out) {
    if (auto raw = text(key)) out = split_list(*raw);
  }

  std::optional<std::string> text(const std::string& key) {
    seen_.insert(key);
    if (tree_ == nullptr) return std::nullopt;
    const auto child = tree_->get_child_optional(pt::ptree::path_type(key, '\0'));
    if (!child) return std::nullopt;
    return trim(child->data());
  }

  void reject_unknown() {
    if (tree_ == nullptr) return;
    for (const auto& [key, value] : *tree_)
      if (!seen_.count(key)) errors_.push_back(name_ + "." + key + ": unknown key");
  }

private:
  const pt::ptree* tree_;
  std::string name_;
  std::vector<std::string>& errors_;
  std::set<std::string> seen_;
};

const pt::ptree* find_section(const pt::ptree& root, const std::string& name) {
  const auto child = root.get_child_optional(pt::ptree::path_type(name, '\0'));
  return child ? &*child : nullptr;
}

bool is_builtin(const std::string& cycle) { return cycle == "urban" || cycle == "highway"; }

std::string csv_number(double v) {
  if (std::isnan(v)) return "nan";
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

void write_atomically(const std::filesystem::path& path, const std::string& content) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error("cannot write " + tmp.string());
    out << content;
    if (!out) throw Error("failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> violations)
    : Error([&] {
        std::string msg = "invalid configuration";
        for (const auto& v : violations) msg += "\n  " + v;
        return msg;
      }()),
      violations_(std::move(violations)) {}

ExperimentConfig::ExperimentConfig() : controllers(controller_names()) {}

const std::vector<std::string>& controller_names() {
  static const std::vector<std::string> names{"baseline", "smoothing-single-gear", "shift-map",
                                              "dp-separate", "co-optimization"};
  return names;
}

ExperimentConfig parse_config(std::istream& in, const std::filesystem::path& base_dir) {
  pt::ptree root;
  try {
    pt::ini_parser::read_ini(in, root);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError({"line " + std::to_string(e.line()) + ": " + e.message()});
  }

  ExperimentConfig c;
  c.base_dir = base_dir;
  std::vector<std::string> errors;
  std::set<std::string> known{"vehicle", "gearbox", "motor", "battery", "mpc", "solver", "experiment"};

  {
    Section s(find_section(root, "vehicle"), "vehicle", errors);
    auto& v = c.models.vehicle;
    s.number("mass", v.mass);
    s.number("wheel_radius", v.wheel_radius);
    s.number("frontal_area", v.frontal_area);
    s.number("drag_coefficient", v.drag_coefficient);
    s.number("air_density", v.air_density);
    s.number("rolling_resistance", v.rolling_resistance);
    s.number("gravity", v.gravity);
    s.reject_unknown();
  }
  {
    Section s(find_section(root, "gearbox"), "gearbox", errors);
    auto& g = c.models.gearbox;
    s.numbers("ratios", g.ratios);
    s.number("final_drive", g.final_drive);
    s.number("single_ratio", g.single_ratio);
    s.reject_unknown();
  }
  {
    Section s(find_section(root, "motor"), "motor", errors);
    auto& m = c.models.motor;
    s.number("stall_torque", m.stall_torque);
    s.number("corner_power", m.corner_power);
    s.number("c0", m.c0);
    s.number("c1", m.c1);
    s.number("c2", m.c2);
    s.number("c3", m.c3);
    s.number("c4", m.c4);
    s.number("efficiency_floor", m.efficiency_floor);
    s.number("efficiency_scale", m.efficiency_scale);
    s.reject_unknown();
  }
  {
    Section s(find_section(root, "battery"), "battery", errors);
    auto& b = c.models.battery;
    double ah = b.capacity / 3600.0;
    s.number("capacity_ah", ah);
    b.capacity = ah * 3600.0;
    s.number("v0", b.v0);
    s.number("kv", b.kv);
    s.number("r0", b.r0);
    s.number("kr", b.kr);
    s.number("discharge_efficiency", b.discharge_efficiency);
    s.number("charge_efficiency", b.charge_efficiency);
    s.number("soc_min", b.soc_min);
    s.number("soc_max", b.soc_max);
    s.number("initial_soc", c.initial_soc);
    if (auto regen = s.text("regen")) {
      if (*regen == "divide") b.regen = RegenModel::divide;
      else if (*regen == "multiply") b.regen = RegenModel::multiply;
      else errors.push_back("battery.regen: expected 'divide' or 'multiply'");
    }
    s.reject_unknown();
  }
  {
    Section s(find_section(root, "mpc"), "mpc", errors);
    auto& m = c.mpc;
    std::vector<double> horizons(c.horizons.begin(), c.horizons.end());
    s.numbers("horizons", horizons);
    c.horizons.clear();
    for (double h : horizons) {
      if (h != std::floor(h)) errors.push_back("mpc.horizons: expected integers");
      c.horizons.push_back(static_cast<int>(h));
    }
    s.number("ts", m.ts);
    s.number("w1", m.w1);
    s.number("w2", m.w2);
    s.number("w3", m.w3);
    s.number("penalty_weight", m.penalty_weight);
    s.integer("max_shifts", m.max_shifts);
    s.number("tau_min", m.headway.tau_min);
    s.number("tau_max", m.headway.tau_max);
    s.number("delta", m.headway.delta);
    double vmin = m.v_min / kKmh;
    double vmax = m.v_max / kKmh;
    s.number("v_min_kmh", vmin);
    s.number("v_max_kmh", vmax);
    m.v_min = vmin * kKmh;
    m.v_max = vmax * kKmh;
    s.reject_unknown();
  }
  {
    Section s(find_section(root, "solver"), "solver", errors);
    auto& o = c.mpc.solver;
    s.integer("max_iterations", o.max_iterations);
    s.number("step_tolerance", o.step_tolerance);
    s.number("objective_tolerance", o.objective_tolerance);
    s.number("gradient_tolerance", o.gradient_tolerance);
    s.reject_unknown();
  }
  {
    Section s(find_section(root, "experiment"), "experiment", errors);
    std::vector<std::string> names;
    s.words("scenarios", names);
    if (!names.empty()) {
      c.scenarios.clear();
      for (const auto& n : names) c.scenarios.push_back({n, n, {}});
    }
    s.words("controllers", c.controllers);
    if (auto dir = s.text("output_dir")) c.output_dir = *dir;
    if (auto seed = s.text("seed")) {
      try {
        std::size_t used = 0;
        c.seed = std::stoull(*seed, &used);
        if (used != seed->size()) throw std::invalid_argument("trailing");
      } catch (const std::exception&) {
        errors.push_back("experiment.seed: '" + *seed + "' is not an unsigned integer");
      }
    }
    s.reject_unknown();
  }
  for (auto& entry : c.scenarios) {
    const std::string section = "scenario:" + entry.name;
    known.insert(section);
    Section s(find_section(root, section), section, errors);
    if (auto cycle = s.text("cycle")) entry.cycle = *cycle;
    double gap = std::numeric_limits<double>::quiet_NaN();
    s.number("initial_gap", gap);
    if (!std::isnan(gap)) entry.initial_gap = gap;
    s.reject_unknown();
  }
  for (const auto& [name, value] : root)
    if (!known.count(name)) errors.push_back("[" + name + "]: unknown section");

  if (!errors.empty()) throw ConfigError(std::move(errors));
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError({"cannot open config file " + path.string()});
  return parse_config(in, path.parent_path());
}

std::vector<std::string> config_violations(const ExperimentConfig& c) {
  std::vector<std::string> out;
  auto check = [&](auto&& fn) {
    try {
      fn();
    } catch (const Error& e) {
      out.emplace_back(e.what());
    }
  };
  check([&] { c.models.vehicle.validate(); });
  check([&] { c.models.gearbox.validate(); });
  check([&] { c.models.motor.validate(); });
  check([&] { c.models.battery.validate(); });
  check([&] { c.mpc.validate(); });
  if (!(c.initial_soc > c.models.battery.soc_min && c.initial_soc < c.models.battery.soc_max))
    out.push_back("battery.initial_soc must lie strictly inside the SoC bounds");
  if (c.horizons.empty()) out.push_back("mpc.horizons must list at least one horizon");
  for (int n : c.horizons)
    if (n < 1) out.push_back("mpc.horizons: horizon " + std::to_string(n) + " must be at least 1");
  if (c.controllers.empty()) out.push_back("experiment.controllers must name at least one controller");
  for (const auto& name : c.controllers) {
    const auto& known = controller_names();
    if (std::find(known.begin(), known.end(), name) == known.end())
      out.push_back("experiment.controllers: unknown controller '" + name + "'");
  }
  if (c.scenarios.empty()) out.push_back("experiment.scenarios must name at least one scenario");
  std::set<std::string> names;
  for (const auto& entry : c.scenarios) {
    if (!names.insert(entry.name).second) out.push_back("scenario '" + entry.name + "' listed twice");
    check([&] {
      Scenario s = resolve_scenario(entry, c);
      s.validate(c.mpc.headway, c.mpc.v_max);
    });
  }
  return out;
}

Scenario resolve_scenario(const ScenarioSpec& entry, const ExperimentConfig& config) {
  DriveCycle cycle;
  if (is_builtin(entry.cycle)) {
    cycle = builtin_cycle(entry.cycle, config.seed);
  } else {
    std::filesystem::path path = entry.cycle;
    if (path.is_relative() && !config.base_dir.empty()) path = config.base_dir / path;
    if (!std::filesystem::exists(path))
      throw ValidationError("scenario '" + entry.name + "': cycle file " + path.string() + " not found");
    try {
      cycle = load_cycle(path, config.mpc.ts);
    } catch (const ParseError& e) {
      throw ValidationError("scenario '" + entry.name + "': " + path.string() + ": " + e.what());
    }
  }
  cycle.name = entry.name;
  Scenario s = make_scenario(std::move(cycle), config.mpc.headway);
  if (entry.initial_gap) s.initial_gap = *entry.initial_gap;
  s.initial_state.soc = config.initial_soc;
  return s;
}

RunResult run_controller(const std::string& controller, const Scenario& scenario,
                         const MpcConfig& mpc, const Powertrain& models) {
  if (controller == "baseline") return run_exact_tracking(scenario, mpc, models);
  if (controller == "smoothing-single-gear") return run_smoothing_single_gear(scenario, mpc, models);
  if (controller == "shift-map")
    return run_shift_map(scenario, mpc, models,
                         synthesize_shift_schedule(models.motor, models.gearbox, models.vehicle, mpc.v_max));
  if (controller == "dp-separate") return run_dp_separate(scenario, mpc, models);
  if (controller == "co-optimization") return run_co_optimization(scenario, mpc, models);
  throw ValidationError("unknown controller '" + controller + "'");
}

std::vector<SummaryRow> summarize(const std::vector<RunResult>& runs) {
  std::map<std::pair<std::string, int>, double> base;
  for (const auto& r : runs)
    if (r.controller == "baseline") base[{r.cycle, r.horizon}] = r.delta_soc;
  std::vector<SummaryRow> rows;
  for (const auto& r : runs) {
    SummaryRow row;
    row.controller = r.controller;
    row.cycle = r.cycle;
    row.horizon = r.horizon;
    row.delta_soc = r.delta_soc;
    const auto it = base.find({r.cycle, r.horizon});
    row.improvement = (it != base.end() && it->second != 0.0)
                          ? 100.0 * (it->second - r.delta_soc) / it->second
                          : std::numeric_limits<double>::quiet_NaN();
    row.shifts = r.shift_count;
    row.tracking_rms = r.tracking_rms;
    row.mean_solve_time = r.mean_solve_time;
    row.max_solve_time = r.max_solve_time;
    row.hard_violations = r.hard_violations;
    row.speed_band_violations = r.speed_band_violations;
    row.headway_violations = r.headway_violations;
    row.fallback_steps = r.fallback_steps;
    rows.push_back(row);
  }
  return rows;
}

void write_trajectory(std::ostream& out, const RunResult& run) {
  out << "t,v_ref,v,s,gap,gear,T_m,T_w,P_b,SoC,J_smooth,J_gear,J_refined,J_warm,solve_time\n";
  for (const auto& r : run.log) {
    out << csv_number(r.time) << ',' << csv_number(r.v_ref) << ',' << csv_number(r.speed) << ','
        << csv_number(r.position) << ',' << csv_number(r.gap) << ',' << r.gear << ','
        << csv_number(r.motor_torque) << ',' << csv_number(r.wheel_torque) << ','
        << csv_number(r.battery_power) << ',' << csv_number(r.soc) << ','
        << csv_number(r.smoothing_objective) << ',' << csv_number(r.gear_score) << ','
        << csv_number(r.refined_objective) << ',' << csv_number(r.warm_objective) << ','
        << csv_number(r.solve_time) << '\n';
  }
}

void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows) {
  out << "controller,cycle,horizon,delta_soc,improvement,shifts,tracking_rms,mean_solve_time,"
         "max_solve_time,hard_violations,speed_band_violations,headway_violations,fallback_steps\n";
  for (const auto& r : rows) {
    out << r.controller << ',' << r.cycle << ',' << r.horizon << ',' << csv_number(r.delta_soc) << ','
        << csv_number(r.improvement) << ',' << r.shifts << ',' << csv_number(r.tracking_rms) << ','
        << csv_number(r.mean_solve_time) << ',' << csv_number(r.max_solve_time) << ','
        << r.hard_violations << ',' << r.speed_band_violations << ',' << r.headway_violations << ','
        << r.fallback_steps << '\n';
  }
}

nlohmann::json summary_json(const std::vector<SummaryRow>& rows) {
  auto number = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  nlohmann::json out = nlohmann::json::array();
  for (const auto& r : rows) {
    out.push_back({{"controller", r.controller},
                   {"cycle", r.cycle},
                   {"horizon", r.horizon},
                   {"delta_soc", number(r.delta_soc)},
                   {"improvement", number(r.improvement)},
                   {"shifts", r.shifts},
                   {"tracking_rms", number(r.tracking_rms)},
                   {"mean_solve_time", number(r.mean_solve_time)},
                   {"max_solve_time", number(r.max_solve_time)},
                   {"hard_violations", r.hard_violations},
                   {"speed_band_violations", r.speed_band_violations},
                   {"headway_violations", r.headway_violations},
                   {"fallback_steps", r.fallback_steps}});
  }
  return out;
}

std::size_t Trajectory::column(const std::string& name) const {
  const auto it = std::find(columns.begin(), columns.end(), name);
  if (it == columns.end()) throw ValidationError("trajectory has no column '" + name + "'");
  return static_cast<std::size_t>(it - columns.begin());
}

Trajectory read_trajectory(std::istream& in) {
  Trajectory t;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(trim(field));
    if (t.columns.empty()) {
      t.columns = std::move(fields);
      continue;
    }
    if (fields.size() != t.columns.size())
      throw ParseError("expected " + std::to_string(t.columns.size()) + " fields", line_no);
    std::vector<double> row;
    for (const auto& f : fields) {
      if (f == "nan") {
        row.push_back(std::numeric_limits<double>::quiet_NaN());
        continue;
      }
      try {
        row.push_back(std::stod(f));
      } catch (const std::exception&) {
        throw ParseError("'" + f + "' is not a number", line_no);
      }
    }
    t.rows.push_back(std::move(row));
  }
  if (t.columns.empty()) throw ParseError("missing header", line_no);
  return t;
}

std::string trajectory_file_name(const std::string& scenario, const std::string& controller,
                                 int horizon) {
  return scenario + "_" + controller + "_N" + std::to_string(horizon) + ".csv";
}

int run_experiment(const ExperimentConfig& config, const RunOptions& options, std::ostream& log,
                   std::ostream& err) {
  const std::filesystem::path out_dir = options.output_dir.value_or(config.output_dir);
  std::filesystem::create_directories(out_dir);

  std::vector<Scenario> scenarios;
  for (const auto& entry : config.scenarios) scenarios.push_back(resolve_scenario(entry, config));

  struct Task {
    std::size_t scenario;
    std::string controller;
    int horizon;
  };
  std::vector<Task> tasks;
  for (std::size_t s = 0; s < scenarios.size(); ++s)
    for (int n : config.horizons)
      for (const auto& name : config.controllers) tasks.push_back({s, name, n});

  std::vector<RunResult> results(tasks.size());
  std::vector<std::string> failures(tasks.size());
  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;

  auto worker = [&] {
    for (std::size_t i = next++; i < tasks.size(); i = next++) {
      const Task& task = tasks[i];
      const std::string& scenario = config.scenarios[task.scenario].name;
      MpcConfig mpc = config.mpc;
      mpc.horizon = task.horizon;
      try {
        results[i] = run_controller(task.controller, scenarios[task.scenario], mpc, config.models);
        std::ostringstream csv;
        write_trajectory(csv, results[i]);
        write_atomically(out_dir / trajectory_file_name(scenario, task.controller, task.horizon), csv.str());
        std::lock_guard lock(log_mutex);
        log << scenario << " " << task.controller << " N=" << task.horizon << ": dSoC "
            << std::fixed << std::setprecision(4) << results[i].delta_soc << " %\n";
        log.unsetf(std::ios::floatfield);
      } catch (const std::exception& e) {
        failures[i] = "scenario '" + scenario + "', controller " + task.controller +
                      ", N=" + std::to_string(task.horizon) + ": " + e.what();
      }
    }
  };

  const unsigned jobs = std::max(1u, std::min<unsigned>(options.jobs, static_cast<unsigned>(tasks.size())));
  {
    std::vector<std::jthread> pool;
    for (unsigned j = 1; j < jobs; ++j) pool.emplace_back(worker);
    worker();
  }

  bool failed = false;
  for (const auto& f : failures) {
    if (f.empty()) continue;
    err << "error: " << f << '\n';
    failed = true;
  }
  if (failed) return 3;

  const auto rows = summarize(results);
  std::ostringstream csv;
  write_summary_csv(csv, rows);
  write_atomically(out_dir / "summary.csv", csv.str());
  write_atomically(out_dir / "summary.json", summary_json(rows).dump(2) + "\n");
  log << "wrote " << results.size() << " trajectories and summary to " << out_dir.string() << '\n';
  return 0;
}

void emit_cycles(const std::filesystem::path& dir, std::uint64_t seed) {
  std::filesystem::create_directories(dir);
  const BuiltinCycles cycles = synthesize_cycles(seed);
  for (const DriveCycle* c : {&cycles.urban, &cycles.highway}) {
    std::ostringstream os;
    write_cycle(os, *c);
    write_atomically(dir / (c->name + ".csv"), os.str());
  }
}

}  // namespace evco
