#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tiltrotor/episode_log.hpp"
#include "tiltrotor/pid.hpp"
#include "tiltrotor/planner.hpp"

namespace tiltrotor {

/// One row of the controller comparison table.
struct MetricsRecord {
  std::string controller;
  double mean_abs_pitch_deg = 0.0;
  double max_position_error = 0.0;   ///< m, against the active hover point
  double mean_position_error = 0.0;  ///< m, against the active hover point
  double mean_reference_error = 0.0;  ///< m, distance to the path polyline
  double hover_fraction = 0.0;
  double cruise_fraction = 0.0;
  bool completed = false;
  bool crashed = false;
  double duration = 0.0;  ///< s
  std::size_t steps = 0;
};

/// Distance from p to the polyline through the path's hover points.
double distance_to_polyline(const Vec3& p, const std::vector<Vec3>& points);

/// Aggregates a log into one comparison row. Throws DomainError on an empty log.
MetricsRecord run_episode_metrics(const EpisodeLog& log, const PlannedPath& path, std::string controller = "");

struct TradeoffRow {
  double k = 0.0;
  bool present = false;  ///< false when no controller was supplied for this k
  double time_cost = 0.0;  ///< s, mean over runs
  double max_error = 0.0;  ///< m, max over runs
  double mean_error = 0.0;
  double hover_fraction = 0.0;
  double completion_rate = 0.0;
  std::size_t runs = 0;
};

struct TradeoffTable {
  std::vector<TradeoffRow> rows;
  /// Whether max error is non-decreasing in k over the present rows.
  bool max_error_nondecreasing = true;
};

struct SweepOptions {
  ExecutionOptions execution;
  RewardWeights weights;
  std::vector<std::uint64_t> seeds{0};
  double min_spacing = 1.0;  ///< spacing used for k = 0
};

/// Hover-point spacing used for range k.
double sweep_spacing(double k, double min_spacing);

/// Runs every present controller on the test trajectory resampled at spacing k
/// and folds the per-run metrics into one row per k.
TradeoffTable sweep_target_range(const std::vector<double>& k_values,
                                 const std::map<double, PolicyParams>& controllers, const Trajectory& test_path,
                                 const VehicleParams& vehicle, const SweepOptions& options);

struct ComparisonOptions {
  ExecutionOptions execution;
  RewardWeights weights;
  double spacing = 10.0;  ///< hover-point spacing for both controllers
};

struct Comparison {
  std::vector<MetricsRecord> records;  ///< {pid, st3m}
  EpisodeLog pid_log;
  EpisodeLog st3m_log;
};

/// Flies the same balanced path with the dual-loop PID baseline and the
/// learned policy from the same spawn state.
Comparison compare_controllers(const Trajectory& test_path, const PolicyParams& policy, const DualLoopGains& gains,
                               const VehicleParams& vehicle, const ComparisonOptions& options);

/// Folds per-run metrics into a sweep row (used by sweep_target_range).
TradeoffRow aggregate_runs(double k, const std::vector<MetricsRecord>& runs);

void export_csv(const std::vector<MetricsRecord>& records, const std::filesystem::path& destination);
void export_csv(const EpisodeLog& log, const std::filesystem::path& destination);
void export_csv(const TradeoffTable& table, const std::filesystem::path& destination);

std::vector<MetricsRecord> read_metrics_csv(const std::filesystem::path& path);
EpisodeLog read_episode_csv(const std::filesystem::path& path);
TradeoffTable read_tradeoff_csv(const std::filesystem::path& path);

}  // namespace tiltrotor
