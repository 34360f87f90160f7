#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <random>
#include <string_view>

#include "tiltrotor/config.hpp"
#include "tiltrotor/vehicle.hpp"

namespace tiltrotor {

inline constexpr std::size_t kObservationSize = 17;
inline constexpr std::size_t kActionSize = 5;

/// [attitude(3), 0.25 tanh(V)(3), tanh(omega)(3), target - P (3), previous command in [-1, 1] (5)]
using Observation = std::array<double, kObservationSize>;
/// Normalized actuator command in [-1, 1]^5.
using ActionVector = std::array<double, kActionSize>;

namespace obs_layout {
inline constexpr std::size_t attitude = 0;
inline constexpr std::size_t velocity = 3;
inline constexpr std::size_t rates = 6;
inline constexpr std::size_t delta_position = 9;
inline constexpr std::size_t prev_command = 12;
}  // namespace obs_layout

struct RewardWeights {
  double w_v = 0.2;
  double w_omega = 0.1;
  double r_proj_scale = 1.0;
  /// Penalty per metre of distance to the target, saturating at track_cap
  /// metres. Zero gives the pure stability reward.
  double w_p = 0.0;
  double track_cap = 10.0;
  /// Penalty per radian of heading away from zero (wrapped yaw).
  double w_psi = 0.0;
  /// One-off reward each time an arrival advances the random-walk target.
  double arrival_bonus = 0.0;

  /// Keys w_v, w_omega, r_proj_scale, w_p, track_cap, w_psi, arrival_bonus.
  static RewardWeights from_config(const KeyValueConfig& cfg);
  void validate() const;
};

struct EpisodeConfig {
  double k = 0.0;                ///< target random-walk range (m)
  int horizon = 2000;            ///< T, steps per episode
  double arrival_radius = 1.0;   ///< m
  double crash_attitude = 80.0 * std::numbers::pi / 180.0;  ///< bound on |phi| and |theta|
  double position_bound = 100.0;  ///< bound on |P| (m)
  std::uint64_t seed = 0;

  // Uniform half-widths of the spawn perturbation around the trim state.
  double spawn_position_noise = 0.5;
  double spawn_attitude_noise = 0.1;
  double spawn_velocity_noise = 0.2;
  double spawn_rate_noise = 0.1;

  /// Move the target with advance_target on arrival. Disabled by executors that
  /// drive the target themselves.
  bool random_walk = true;
  /// Draw the walk from U[-k, k) instead of U[0, k).
  bool symmetric_walk = false;

  /// Keys horizon, arrival_radius, crash_attitude_deg, position_bound,
  /// symmetric_walk and spawn_{position,attitude,velocity,rate}_noise.
  static EpisodeConfig from_config(const KeyValueConfig& cfg);
  void validate() const;
};

enum class TerminationStatus { running, horizon, crash_attitude, out_of_bounds, diverged };
enum class FlightMode { hover, cruise };

std::string_view to_string(TerminationStatus status);
std::string_view to_string(FlightMode mode);

inline constexpr double kHoverTiltLimit = 60.0 * std::numbers::pi / 180.0;

/// Hover iff the tilt is at most 60 degrees.
FlightMode classify_mode(double tilt);

Observation build_observation(const BodyState& state, const Vec3& target,
                              const ActuatorCommand& prev, const VehicleParams& params);

/// alignment * r_proj_scale - w_v |V| - w_omega |omega|
double step_reward(const BodyState& state, const RewardWeights& weights);

/// Adds an independent U[0, k) sample to each axis, or U[-k, k) when symmetric.
Vec3 advance_target(const Vec3& target, double k, std::mt19937_64& rng, bool symmetric = false);

TerminationStatus check_termination(const BodyState& state, int step, const EpisodeConfig& config);

/// Affine map [-1, 1]^5 -> [0, omega_max]^3 x [mu_min, mu_max]^2. Throws
/// DomainError on entries outside [-1, 1] or NaN.
ActuatorCommand denormalize_action(const ActionVector& action, const VehicleParams& params);
ActionVector normalize_command(const ActuatorCommand& cmd, const VehicleParams& params);

struct StepInfo {
  Vec3 delta_position = Vec3::Zero();
  double tilt = 0.0;
  FlightMode mode = FlightMode::hover;
  TerminationStatus status = TerminationStatus::running;
  bool crashed = false;
  bool arrived = false;
  int step = 0;
};

struct StepResult {
  Observation observation{};
  double reward = 0.0;
  bool done = false;
  StepInfo info;
};

/// Single-threaded episodic environment. Instances share nothing, so rollouts
/// can run one environment per thread.
class HoverEnv {
 public:
  HoverEnv(VehicleParams params, RewardWeights weights, EpisodeConfig config);

  /// Starts a new episode, continuing this instance's RNG stream.
  Observation reset();
  /// Reseeds, then starts a new episode.
  Observation reset(std::uint64_t seed);

  StepResult step(const ActionVector& action);

  const BodyState& state() const { return state_; }
  const Vec3& target() const { return target_; }
  void set_target(const Vec3& target) { target_ = target; }
  /// Overrides the spawn state (used by scripted scenarios and tests).
  void set_state(const BodyState& state) { state_ = state; }
  const ActuatorCommand& last_command() const { return prev_command_; }
  int step_index() const { return step_; }
  Observation observation() const;

  const VehicleParams& params() const { return params_; }
  const RewardWeights& weights() const { return weights_; }
  const EpisodeConfig& config() const { return config_; }
  EpisodeConfig& mutable_config() { return config_; }
  const TrimSolution& trim() const { return trim_; }

 private:
  VehicleParams params_;
  RewardWeights weights_;
  EpisodeConfig config_;
  TrimSolution trim_;
  std::mt19937_64 rng_;

  BodyState state_;
  Vec3 target_ = Vec3::Zero();
  ActuatorCommand prev_command_;
  int step_ = 0;
  bool done_ = false;
};

}  // namespace tiltrotor
