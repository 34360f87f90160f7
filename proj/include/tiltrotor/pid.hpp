#pragma once

#include <array>
#include <string>

#include "tiltrotor/vehicle.hpp"

namespace tiltrotor {

class KeyValueConfig;

struct PidGains {
  double kp = 0.0;
  double ki = 0.0;
  double kd = 0.0;
  double integral_limit = 1.0;  ///< bound on |integral of error|
  double output_limit = 1.0;    ///< bound on |output|

  void validate() const;
};

struct PidChannelState {
  double integral = 0.0;
  double prev_error = 0.0;
  bool primed = false;  ///< false until the first sample, so the first derivative is 0
};

struct PidOutput {
  double output = 0.0;
  PidChannelState state;
};

/// kp e + ki (integral e dt) + kd de/dt, integral clamped (anti-windup) and
/// output clamped. Throws DomainError when dt <= 0.
PidOutput pid_step(double error, const PidChannelState& state, const PidGains& gains, double dt);

/// Cascade gains. The outer loop outputs accelerations (m/s^2); the inner loop
/// outputs angular accelerations (rad/s^2) that are scaled by the inertia.
struct DualLoopGains {
  PidGains outer_x;
  PidGains outer_y;
  PidGains outer_z;
  PidGains inner_roll;
  PidGains inner_pitch;
  PidGains inner_yaw;
  double max_tilt_reference = 0.5;  ///< rad, clamp on roll/pitch references

  static DualLoopGains defaults();
  /// Keys "<channel>.kp" etc. with channels outer_x, outer_y, outer_z,
  /// inner_roll, inner_pitch, inner_yaw, plus max_tilt_reference. Missing keys
  /// keep their defaults; invalid values raise ConfigError.
  static DualLoopGains from_config(const KeyValueConfig& cfg);
  void validate() const;
};

struct DualLoopState {
  std::array<PidChannelState, 3> outer{};  ///< x, y, z
  std::array<PidChannelState, 3> inner{};  ///< roll, pitch, yaw
};

struct MixerResult {
  ActuatorCommand command;
  bool saturated = false;  ///< some channel was clipped to the actuator limits
};

/// Inverts the rotor wrench map for a body z force and three moments, taking the
/// two wing rotors to share their forward component. Commands outside the
/// actuator envelope are clipped to the nearest feasible value.
MixerResult mix_wrench(double force_z, const Vec3& moment, const VehicleParams& params);

struct AttitudeReference {
  double roll = 0.0;
  double pitch = 0.0;
  double yaw = 0.0;
  double force_z = 0.0;  ///< body z force demand (N, negative = up)
};

struct DualLoopOutput {
  ActuatorCommand command;
  DualLoopState state;
  AttitudeReference reference;
  Vec3 moment_demand = Vec3::Zero();
  bool saturated = false;
};

/// One control tick of the cascade: position errors become attitude and thrust
/// references about the trim point, attitude errors become moment demands, and
/// the mixer turns both into a command inside the actuator limits.
DualLoopOutput dual_loop_control(const BodyState& state, const Vec3& target, const DualLoopState& loop_state,
                                 const DualLoopGains& gains, const VehicleParams& params,
                                 const TrimSolution& trim, double dt);

/// Stateful wrapper holding the cascade state between ticks.
class DualLoopController {
 public:
  DualLoopController(VehicleParams params, DualLoopGains gains);

  ActuatorCommand update(const BodyState& state, const Vec3& target);
  void reset() { state_ = {}; }
  const DualLoopState& state() const { return state_; }
  const TrimSolution& trim() const { return trim_; }
  const DualLoopOutput& last() const { return last_; }

 private:
  VehicleParams params_;
  DualLoopGains gains_;
  TrimSolution trim_;
  DualLoopState state_;
  DualLoopOutput last_;
};

}  // namespace tiltrotor
