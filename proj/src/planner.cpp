#include "tiltrotor/planner.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

#include "tiltrotor/csv.hpp"
#include "tiltrotor/errors.hpp"

namespace tiltrotor {

void Trajectory::validate() const {
  if (points.size() < 2) throw DomainError("trajectory needs at least 2 points");
  if (!attitudes.empty() && attitudes.size() != points.size()) {
    throw DomainError("trajectory attitude count does not match point count");
  }
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!points[i].allFinite()) throw DomainError("trajectory point " + std::to_string(i) + " is not finite");
    if (i > 0 && (points[i] - points[i - 1]).norm() == 0.0) {
      throw DomainError("trajectory points " + std::to_string(i - 1) + " and " + std::to_string(i) +
                        " coincide");
    }
  }
}

double Trajectory::length() const {
  double l = 0.0;
  for (std::size_t i = 1; i < points.size(); ++i) l += (points[i] - points[i - 1]).norm();
  return l;
}

double PlannedPath::max_gap() const {
  double g = 0.0;
  for (std::size_t i = 1; i < points.size(); ++i) g = std::max(g, (points[i] - points[i - 1]).norm());
  return g;
}

PlannedPath balance_path(const Trajectory& traj, double spacing) {
  if (!(spacing > 0.0) || !std::isfinite(spacing)) throw DomainError("path spacing must be > 0");
  traj.validate();

  std::vector<double> cumulative(traj.points.size(), 0.0);
  for (std::size_t i = 1; i < traj.points.size(); ++i) {
    cumulative[i] = cumulative[i - 1] + (traj.points[i] - traj.points[i - 1]).norm();
  }
  const double total = cumulative.back();
  // Shave rounding so an exact multiple does not produce a near-duplicate endpoint.
  const auto intervals = static_cast<std::size_t>(std::ceil(total / spacing * (1.0 - 1e-12)));

  PlannedPath out;
  out.spacing = spacing;
  const bool with_attitude = !traj.attitudes.empty();
  std::size_t seg = 1;
  const auto sample = [&](double s) {
    while (seg + 1 < cumulative.size() && cumulative[seg] < s) ++seg;
    const double len = cumulative[seg] - cumulative[seg - 1];
    const double u = std::clamp((s - cumulative[seg - 1]) / len, 0.0, 1.0);
    out.points.push_back(traj.points[seg - 1] + u * (traj.points[seg] - traj.points[seg - 1]));
    out.attitudes.push_back(with_attitude ? Vec3(traj.attitudes[seg - 1] +
                                                 u * (traj.attitudes[seg] - traj.attitudes[seg - 1]))
                                          : Vec3::Zero());
  };
  for (std::size_t i = 0; i < intervals; ++i) sample(static_cast<double>(i) * spacing);
  out.points.push_back(traj.points.back());
  out.attitudes.push_back(with_attitude ? traj.attitudes.back() : Vec3::Zero());
  return out;
}

void CostWeights::validate() const {
  for (const Mat3* q : {&q1, &q2}) {
    if (!q->allFinite() || (*q - q->transpose()).cwiseAbs().maxCoeff() > 1e-12) {
      throw DomainError("cost weight matrix must be symmetric");
    }
    const Eigen::SelfAdjointEigenSolver<Mat3> eig(*q);
    if (eig.eigenvalues().minCoeff() < -1e-12) throw DomainError("cost weight matrix must be PSD");
  }
  if (!(eps1_max > 0.0 && eps2_max > 0.0)) throw DomainError("velocity/rate difference bounds must be > 0");
}

TrackingCost tracking_cost(const EpisodeLog& log, const PlannedPath& path, const CostWeights& weights,
                           CostSampling sampling) {
  TrackingCost cost;
  std::vector<const EpisodeRow*> samples;
  std::vector<std::size_t> sample_point;
  if (sampling == CostSampling::every_step) {
    for (const EpisodeRow& r : log.rows) {
      samples.push_back(&r);
      sample_point.push_back(r.target_index);
    }
  } else {
    for (std::size_t i = 0; i < log.rows.size(); ++i) {
      const bool last_of_point = i + 1 == log.rows.size() || log.rows[i + 1].target_index != log.rows[i].target_index;
      const bool reached = log.rows[i].target_index < log.points_reached;
      if (last_of_point && reached) {
        samples.push_back(&log.rows[i]);
        sample_point.push_back(log.rows[i].target_index);
      }
    }
  }

  for (std::size_t k = 0; k < samples.size(); ++k) {
    const EpisodeRow& r = *samples[k];
    const std::size_t i = sample_point[k];
    if (i >= path.size()) throw DomainError("log target index outside the planned path");
    const Vec3 dp = r.position - path.points[i];
    const Vec3 di = r.attitude - path.attitudes[i];
    cost.j += dp.dot(weights.q1 * dp) + di.dot(weights.q2 * di);
    if (k > 0) {
      cost.max_velocity_jump = std::max(cost.max_velocity_jump, (r.velocity - samples[k - 1]->velocity).norm());
      cost.max_rate_jump = std::max(cost.max_rate_jump, (r.rates - samples[k - 1]->rates).norm());
    }
  }
  cost.terms = samples.size();
  cost.velocity_within_bound = cost.max_velocity_jump <= weights.eps1_max;
  cost.rate_within_bound = cost.max_rate_jump <= weights.eps2_max;
  return cost;
}

ModeFractions mode_fractions(const EpisodeLog& log) {
  if (log.empty()) throw DomainError("mode_fractions: empty log");
  std::size_t hover = 0;
  for (const EpisodeRow& r : log.rows) hover += r.mode == FlightMode::hover ? 1 : 0;
  ModeFractions f;
  f.hover = static_cast<double>(hover) / static_cast<double>(log.size());
  f.cruise = 1.0 - f.hover;
  return f;
}

ExecutionResult execute_path(const PlannedPath& path, const VehicleParams& vehicle, const RewardWeights& weights,
                             const ExecutionOptions& options, const PathController& controller) {
  if (path.points.empty()) throw DomainError("execute_path: empty path");
  if (options.max_steps <= 0) throw DomainError("execute_path: max_steps must be > 0");

  ExecutionResult result;
  result.spacing_warning = path.max_gap() > options.trained_range;

  EpisodeConfig cfg = options.episode;
  cfg.random_walk = false;
  cfg.horizon = options.max_steps;
  cfg.arrival_radius = options.arrival_radius;
  cfg.seed = options.seed;
  HoverEnv env(vehicle, weights, cfg);
  BodyState spawn = env.state();
  spawn.position += path.points.front();
  env.set_state(spawn);

  // The environment's position bound is about the origin; shift it by the path
  // extent so long paths are not cut short.
  double extent = 0.0;
  for (const Vec3& p : path.points) extent = std::max(extent, p.norm());
  env.mutable_config().position_bound = cfg.position_bound + extent;

  std::size_t active = 0;
  env.set_target(path.points[active]);
  EpisodeLog& log = result.log;
  log.dt = vehicle.dt;

  Observation obs = env.observation();
  while (true) {
    const ActuatorCommand cmd = controller(env.state(), path.points[active], obs);
    const StepResult step = env.step(normalize_command(cmd.clamped(vehicle), vehicle));

    EpisodeRow row;
    row.time = step.info.step * vehicle.dt;
    row.position = env.state().position;
    row.attitude = env.state().attitude;
    row.velocity = env.state().velocity;
    row.rates = env.state().rates;
    row.command = env.last_command();
    row.reward = step.reward;
    row.mode = step.info.mode;
    row.target_index = active;
    row.target = path.points[active];
    log.rows.push_back(row);

    if (step.info.status == TerminationStatus::diverged || step.info.crashed) {
      log.status = step.info.status;
      break;
    }
    if ((path.points[active] - env.state().position).norm() <= options.arrival_radius) {
      ++log.points_reached;
      if (active + 1 == path.size()) {
        log.completed = true;
        log.status = step.done ? step.info.status : TerminationStatus::running;
        break;
      }
      ++active;
      env.set_target(path.points[active]);
    }
    if (step.done) {
      log.status = step.info.status;
      break;
    }
    obs = env.observation();
  }
  return result;
}

ExecutionResult st3m_execute(const PlannedPath& path, const PolicyParams& params, const VehicleParams& vehicle,
                             const RewardWeights& weights, const ExecutionOptions& options) {
  std::mt19937_64 unused(0);
  BatchPolicyEvaluator evaluator;
  std::vector<PolicySample> samples;
  const PathController policy = [&](const BodyState&, const Vec3&, const Observation& obs) {
    evaluator.evaluate(std::span(&obs, 1), params, ActionMode::mean, unused, samples, nullptr, false);
    return denormalize_action(samples.front().action, vehicle);
  };
  return execute_path(path, vehicle, weights, options, policy);
}

Trajectory read_trajectory_csv(const std::filesystem::path& path) {
  const CsvTable table = read_csv(path, /*header_optional=*/true);
  Trajectory traj;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const std::vector<double> row = table.numeric_row(r);
    if (row.size() != 3 && row.size() != 6) {
      throw IoError(path.string() + ":" + std::to_string(table.line_numbers[r]) +
                    ": expected 3 (x,y,z) or 6 (x,y,z,roll,pitch,yaw) columns");
    }
    traj.points.emplace_back(row[0], row[1], row[2]);
    if (row.size() == 6) traj.attitudes.emplace_back(row[3], row[4], row[5]);
  }
  if (!traj.attitudes.empty() && traj.attitudes.size() != traj.points.size()) {
    throw IoError(path.string() + ": attitude columns must be present on every row or none");
  }
  try {
    traj.validate();
  } catch (const DomainError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
  return traj;
}

void write_path_csv(const PlannedPath& path, const std::filesystem::path& destination) {
  CsvWriter w(destination, {"x", "y", "z", "roll", "pitch", "yaw"});
  for (std::size_t i = 0; i < path.size(); ++i) {
    const Vec3& p = path.points[i];
    const Vec3 a = i < path.attitudes.size() ? path.attitudes[i] : Vec3::Zero();
    w.row({p.x(), p.y(), p.z(), a.x(), a.y(), a.z()});
  }
  w.close();
}

}  // namespace tiltrotor
