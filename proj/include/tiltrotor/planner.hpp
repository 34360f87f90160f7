#pragma once

#include <Eigen/Core>

#include <filesystem>
#include <functional>
#include <optional>
#include <vector>

#include "tiltrotor/episode_log.hpp"
#include "tiltrotor/policy.hpp"

namespace tiltrotor {

/// Earth-frame polyline with optional per-point reference attitudes.
struct Trajectory {
  std::vector<Vec3> points;
  std::vector<Vec3> attitudes;  ///< empty, or one (phi, theta, psi) per point

  /// Throws DomainError for fewer than 2 points, repeated consecutive points,
  /// non-finite coordinates, or a mismatched attitude count.
  void validate() const;
  double length() const;
};

/// Hover points the controller flies through in order.
struct PlannedPath {
  std::vector<Vec3> points;
  std::vector<Vec3> attitudes;  ///< reference attitude per point
  double spacing = 0.0;

  std::size_t size() const { return points.size(); }
  double max_gap() const;
};

/// Arc-length resampling: points at 0, s, 2s, ... along the polyline plus the
/// final endpoint, giving ceil(L / s) + 1 points. Reference attitudes are
/// interpolated linearly in arc length when the trajectory carries them.
PlannedPath balance_path(const Trajectory& traj, double spacing);

using Mat3 = Eigen::Matrix3d;

struct CostWeights {
  Mat3 q1 = Mat3::Identity();  ///< position error weight
  Mat3 q2 = Mat3::Identity();  ///< attitude error weight
  double eps1_max = 1.0;       ///< bound on velocity change between hover points (m/s)
  double eps2_max = 1.0;       ///< bound on rate change between hover points (rad/s)

  /// Symmetric PSD weights and positive bounds, else DomainError.
  void validate() const;
};

enum class CostSampling {
  passages,  ///< one term per hover point, at the step it was reached
  every_step,
};

struct TrackingCost {
  double j = 0.0;
  std::size_t terms = 0;
  double max_velocity_jump = 0.0;
  double max_rate_jump = 0.0;
  bool velocity_within_bound = true;
  bool rate_within_bound = true;
};

/// J = sum dP^T Q1 dP + dI^T Q2 dI, errors taken as achieved minus reference.
/// In passage mode the sample for point i is the last row with target index i;
/// points never reached contribute nothing. The velocity/rate jumps compare
/// consecutive samples.
TrackingCost tracking_cost(const EpisodeLog& log, const PlannedPath& path, const CostWeights& weights,
                           CostSampling sampling = CostSampling::passages);

struct ModeFractions {
  double hover = 0.0;
  double cruise = 0.0;
};

/// Share of steps whose mean tilt is at most 60 degrees; cruise = 1 - hover.
ModeFractions mode_fractions(const EpisodeLog& log);

struct ExecutionOptions {
  int max_steps = 6000;
  double arrival_radius = 1.0;
  double trained_range = 10.0;  ///< K the controller was trained for
  std::uint64_t seed = 0;       ///< spawn perturbation
  EpisodeConfig episode;        ///< spawn noise and termination bounds
};

struct ExecutionResult {
  EpisodeLog log;
  bool spacing_warning = false;  ///< some gap exceeds trained_range
};

/// Maps (state, active target, observation) to an actuator command.
using PathController = std::function<ActuatorCommand(const BodyState&, const Vec3&, const Observation&)>;

/// Flies the hover points in order, switching to the next point when the
/// vehicle comes within arrival_radius of the active one. Stops on completion,
/// termination, or max_steps. The spawn state is the perturbed trim state
/// around the first point.
ExecutionResult execute_path(const PlannedPath& path, const VehicleParams& vehicle, const RewardWeights& weights,
                             const ExecutionOptions& options, const PathController& controller);

/// execute_path with the policy's mean action as the controller.
ExecutionResult st3m_execute(const PlannedPath& path, const PolicyParams& params, const VehicleParams& vehicle,
                             const RewardWeights& weights, const ExecutionOptions& options);

/// CSV with x,y,z[,roll,pitch,yaw] per row; a header line is optional on read.
Trajectory read_trajectory_csv(const std::filesystem::path& path);
void write_path_csv(const PlannedPath& path, const std::filesystem::path& destination);

}  // namespace tiltrotor
