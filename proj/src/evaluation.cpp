#include "tiltrotor/evaluation.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "tiltrotor/csv.hpp"
#include "tiltrotor/errors.hpp"

namespace tiltrotor {

namespace {

constexpr double kRadToDeg = 180.0 / std::numbers::pi;

std::string status_text(TerminationStatus s) { return std::string(to_string(s)); }

TerminationStatus parse_status(const std::string& text, const std::filesystem::path& path) {
  for (const TerminationStatus s : {TerminationStatus::running, TerminationStatus::horizon,
                                    TerminationStatus::crash_attitude, TerminationStatus::out_of_bounds,
                                    TerminationStatus::diverged}) {
    if (to_string(s) == text) return s;
  }
  throw IoError(path.string() + ": unknown termination status '" + text + "'");
}

bool parse_flag(const CsvTable& t, std::size_t r, std::size_t c) {
  const std::string& v = t.rows.at(r).at(c);
  if (v == "1" || v == "true") return true;
  if (v == "0" || v == "false") return false;
  throw IoError(t.source.string() + ":" + std::to_string(t.line_numbers[r]) + ": expected 0/1, got '" + v + "'");
}

// "# key=value key=value" metadata lines written ahead of the header.
std::map<std::string, std::string> read_metadata(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::map<std::string, std::string> meta;
  std::string line;
  while (std::getline(in, line) && !line.empty() && line[0] == '#') {
    std::istringstream words(line.substr(1));
    std::string w;
    while (words >> w) {
      const auto eq = w.find('=');
      if (eq != std::string::npos) meta[w.substr(0, eq)] = w.substr(eq + 1);
    }
  }
  return meta;
}

const std::string& meta_value(const std::map<std::string, std::string>& meta, const std::string& key,
                              const std::filesystem::path& path) {
  const auto it = meta.find(key);
  if (it == meta.end()) throw IoError(path.string() + ": missing metadata '" + key + "'");
  return it->second;
}

}  // namespace

double distance_to_polyline(const Vec3& p, const std::vector<Vec3>& points) {
  if (points.empty()) throw DomainError("distance_to_polyline: no points");
  if (points.size() == 1) return (p - points.front()).norm();
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < points.size(); ++i) {
    const Vec3 a = points[i - 1], ab = points[i] - a;
    const double len2 = ab.squaredNorm();
    const double u = len2 > 0.0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
    best = std::min(best, (p - (a + u * ab)).norm());
  }
  return best;
}

MetricsRecord run_episode_metrics(const EpisodeLog& log, const PlannedPath& path, std::string controller) {
  if (log.empty()) throw DomainError("run_episode_metrics: empty log");
  MetricsRecord m;
  m.controller = std::move(controller);
  double pitch_sum = 0.0, err_sum = 0.0, ref_sum = 0.0;
  for (const EpisodeRow& r : log.rows) {
    pitch_sum += std::abs(r.attitude.y());
    const double err = (r.position - r.target).norm();
    err_sum += err;
    m.max_position_error = std::max(m.max_position_error, err);
    ref_sum += distance_to_polyline(r.position, path.points);
  }
  const double n = static_cast<double>(log.size());
  m.mean_abs_pitch_deg = pitch_sum / n * kRadToDeg;
  m.mean_position_error = err_sum / n;
  m.mean_reference_error = ref_sum / n;
  const ModeFractions f = mode_fractions(log);
  m.hover_fraction = f.hover;
  m.cruise_fraction = f.cruise;
  m.completed = log.completed;
  m.crashed = log.crashed();
  m.duration = log.duration();
  m.steps = log.size();
  return m;
}

double sweep_spacing(double k, double min_spacing) { return std::max(k, min_spacing); }

TradeoffRow aggregate_runs(double k, const std::vector<MetricsRecord>& runs) {
  TradeoffRow row;
  row.k = k;
  row.present = true;
  row.runs = runs.size();
  if (runs.empty()) return row;
  double completed = 0.0;
  for (const MetricsRecord& m : runs) {
    row.time_cost += m.duration;
    row.max_error = std::max(row.max_error, m.max_position_error);
    row.mean_error += m.mean_position_error;
    row.hover_fraction += m.hover_fraction;
    completed += m.completed ? 1.0 : 0.0;
  }
  const double n = static_cast<double>(runs.size());
  row.time_cost /= n;
  row.mean_error /= n;
  row.hover_fraction /= n;
  row.completion_rate = completed / n;
  return row;
}

TradeoffTable sweep_target_range(const std::vector<double>& k_values,
                                 const std::map<double, PolicyParams>& controllers, const Trajectory& test_path,
                                 const VehicleParams& vehicle, const SweepOptions& options) {
  TradeoffTable table;
  for (const double k : k_values) {
    const auto it = controllers.find(k);
    if (it == controllers.end()) {
      TradeoffRow absent;
      absent.k = k;
      table.rows.push_back(absent);
      continue;
    }
    const PlannedPath path = balance_path(test_path, sweep_spacing(k, options.min_spacing));
    std::vector<MetricsRecord> runs;
    for (const std::uint64_t seed : options.seeds) {
      ExecutionOptions exec = options.execution;
      exec.seed = seed;
      exec.trained_range = std::max(k, options.min_spacing);
      const ExecutionResult res = st3m_execute(path, it->second, vehicle, options.weights, exec);
      runs.push_back(run_episode_metrics(res.log, path, "st3m"));
    }
    table.rows.push_back(aggregate_runs(k, runs));
  }
  double prev = -std::numeric_limits<double>::infinity();
  for (const TradeoffRow& r : table.rows) {
    if (!r.present) continue;
    if (r.max_error < prev) table.max_error_nondecreasing = false;
    prev = r.max_error;
  }
  return table;
}

Comparison compare_controllers(const Trajectory& test_path, const PolicyParams& policy, const DualLoopGains& gains,
                               const VehicleParams& vehicle, const ComparisonOptions& options) {
  const PlannedPath path = balance_path(test_path, options.spacing);
  DualLoopController pid(vehicle, gains);
  const PathController pid_ctl = [&](const BodyState& s, const Vec3& target, const Observation&) {
    return pid.update(s, target);
  };
  Comparison out;
  out.pid_log = execute_path(path, vehicle, options.weights, options.execution, pid_ctl).log;
  out.st3m_log = st3m_execute(path, policy, vehicle, options.weights, options.execution).log;
  out.records.push_back(run_episode_metrics(out.pid_log, path, "pid"));
  out.records.push_back(run_episode_metrics(out.st3m_log, path, "st3m"));
  return out;
}

void export_csv(const std::vector<MetricsRecord>& records, const std::filesystem::path& destination) {
  CsvWriter w(destination, {"controller", "mean_abs_pitch_deg", "max_position_error_m", "mean_position_error_m",
                            "mean_reference_error_m", "hover_fraction", "cruise_fraction", "completed", "crashed",
                            "duration_s", "steps"});
  for (const MetricsRecord& m : records) {
    w.row(std::vector<std::string>{m.controller, format_double(m.mean_abs_pitch_deg),
                                   format_double(m.max_position_error), format_double(m.mean_position_error),
                                   format_double(m.mean_reference_error), format_double(m.hover_fraction),
                                   format_double(m.cruise_fraction), m.completed ? "1" : "0",
                                   m.crashed ? "1" : "0", format_double(m.duration), std::to_string(m.steps)});
  }
  w.close();
}

std::vector<MetricsRecord> read_metrics_csv(const std::filesystem::path& path) {
  const CsvTable t = read_csv(path);
  std::vector<MetricsRecord> out;
  const std::size_t c_name = t.column("controller"), c_pitch = t.column("mean_abs_pitch_deg"),
                    c_max = t.column("max_position_error_m"), c_mean = t.column("mean_position_error_m"),
                    c_ref = t.column("mean_reference_error_m"), c_hover = t.column("hover_fraction"),
                    c_cruise = t.column("cruise_fraction"), c_done = t.column("completed"),
                    c_crash = t.column("crashed"), c_dur = t.column("duration_s"), c_steps = t.column("steps");
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    MetricsRecord m;
    m.controller = t.rows[r].at(c_name);
    m.mean_abs_pitch_deg = t.number(r, c_pitch);
    m.max_position_error = t.number(r, c_max);
    m.mean_position_error = t.number(r, c_mean);
    m.mean_reference_error = t.number(r, c_ref);
    m.hover_fraction = t.number(r, c_hover);
    m.cruise_fraction = t.number(r, c_cruise);
    m.completed = parse_flag(t, r, c_done);
    m.crashed = parse_flag(t, r, c_crash);
    m.duration = t.number(r, c_dur);
    m.steps = static_cast<std::size_t>(t.number(r, c_steps));
    out.push_back(m);
  }
  return out;
}

void export_csv(const EpisodeLog& log, const std::filesystem::path& destination) {
  std::ostringstream meta;
  meta << "dt=" << format_double(log.dt) << " status=" << status_text(log.status)
       << " completed=" << (log.completed ? 1 : 0) << " points_reached=" << log.points_reached;
  CsvWriter w(destination,
              {"time", "x", "y", "z", "roll", "pitch", "yaw", "u", "v", "w", "p", "q", "r", "omega1", "omega2",
               "omega3", "mu_a", "mu_b", "reward", "mode", "target_index", "target_x", "target_y", "target_z"},
              {meta.str()});
  for (const EpisodeRow& r : log.rows) {
    std::vector<std::string> cells;
    for (const double v : {r.time, r.position.x(), r.position.y(), r.position.z(), r.attitude.x(), r.attitude.y(),
                           r.attitude.z(), r.velocity.x(), r.velocity.y(), r.velocity.z(), r.rates.x(),
                           r.rates.y(), r.rates.z(), r.command.omega1, r.command.omega2, r.command.omega3,
                           r.command.mu_a, r.command.mu_b, r.reward}) {
      cells.push_back(format_double(v));
    }
    cells.emplace_back(to_string(r.mode));
    cells.push_back(std::to_string(r.target_index));
    for (const double v : {r.target.x(), r.target.y(), r.target.z()}) cells.push_back(format_double(v));
    w.row(cells);
  }
  w.close();
}

EpisodeLog read_episode_csv(const std::filesystem::path& path) {
  const auto meta = read_metadata(path);
  const CsvTable t = read_csv(path);
  EpisodeLog log;
  log.dt = std::stod(meta_value(meta, "dt", path));
  log.status = parse_status(meta_value(meta, "status", path), path);
  log.completed = meta_value(meta, "completed", path) == "1";
  log.points_reached = std::stoul(meta_value(meta, "points_reached", path));
  const std::size_t c_mode = t.column("mode"), c_idx = t.column("target_index");
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    EpisodeRow row;
    const auto num = [&](const char* name) { return t.number(r, t.column(name)); };
    row.time = num("time");
    row.position = Vec3(num("x"), num("y"), num("z"));
    row.attitude = Vec3(num("roll"), num("pitch"), num("yaw"));
    row.velocity = Vec3(num("u"), num("v"), num("w"));
    row.rates = Vec3(num("p"), num("q"), num("r"));
    row.command = {num("omega1"), num("omega2"), num("omega3"), num("mu_a"), num("mu_b")};
    row.reward = num("reward");
    const std::string& mode = t.rows[r].at(c_mode);
    if (mode != "hover" && mode != "cruise") {
      throw IoError(path.string() + ":" + std::to_string(t.line_numbers[r]) + ": bad mode '" + mode + "'");
    }
    row.mode = mode == "hover" ? FlightMode::hover : FlightMode::cruise;
    row.target_index = static_cast<std::size_t>(t.number(r, c_idx));
    row.target = Vec3(num("target_x"), num("target_y"), num("target_z"));
    log.rows.push_back(row);
  }
  return log;
}

void export_csv(const TradeoffTable& table, const std::filesystem::path& destination) {
  CsvWriter w(destination,
              {"k", "present", "time_cost_s", "max_error_m", "mean_error_m", "hover_fraction", "completion_rate",
               "runs"},
              {std::string("max_error_nondecreasing=") + (table.max_error_nondecreasing ? "1" : "0")});
  for (const TradeoffRow& r : table.rows) {
    w.row(std::vector<std::string>{format_double(r.k), r.present ? "1" : "0", format_double(r.time_cost),
                                   format_double(r.max_error), format_double(r.mean_error),
                                   format_double(r.hover_fraction), format_double(r.completion_rate),
                                   std::to_string(r.runs)});
  }
  w.close();
}

TradeoffTable read_tradeoff_csv(const std::filesystem::path& path) {
  const auto meta = read_metadata(path);
  const CsvTable t = read_csv(path);
  TradeoffTable table;
  table.max_error_nondecreasing = meta_value(meta, "max_error_nondecreasing", path) == "1";
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    TradeoffRow row;
    row.k = t.number(r, t.column("k"));
    row.present = parse_flag(t, r, t.column("present"));
    row.time_cost = t.number(r, t.column("time_cost_s"));
    row.max_error = t.number(r, t.column("max_error_m"));
    row.mean_error = t.number(r, t.column("mean_error_m"));
    row.hover_fraction = t.number(r, t.column("hover_fraction"));
    row.completion_rate = t.number(r, t.column("completion_rate"));
    row.runs = static_cast<std::size_t>(t.number(r, t.column("runs")));
    table.rows.push_back(row);
  }
  return table;
}

}  // namespace tiltrotor
