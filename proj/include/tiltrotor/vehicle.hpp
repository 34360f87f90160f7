#pragma once

// Tri-rotor tilt VTOL rigid-body model.
//
// Frames: body x forward, y right, z down. The earth frame has the same
// orientation at zero attitude (z down, altitude = -z), so gravity enters the
// body equations as (-g sin(theta), g sin(phi) cos(theta), g cos(phi) cos(theta))
// and rotor thrust appears as negative Fz.
//
// Rotor 1 is the main lift rotor on the longitudinal axis at +l1. Rotors 2 and 3
// are the wing rotors at -l2 longitudinally and +/-l3 laterally; they tilt
// forward by mu_a and mu_b from vertical.

#include <Eigen/Core>

#include <array>
#include <numbers>

namespace tiltrotor {

class KeyValueConfig;

using Vec3 = Eigen::Vector3d;

struct VehicleParams {
  double mass = 1.0;
  double jx = 0.015;
  double jy = 0.025;
  double jz = 0.035;
  double l1 = 0.25;
  double l2 = 0.15;
  double l3 = 0.25;
  double k_f = 0.0;
  double k_m = 0.0;
  double g = 9.81;
  double omega_max = 2200.0;
  double mu_min = 0.0;
  double mu_max = std::numbers::pi / 2.0;
  double dt = 0.01;

  /// Defaults with k_f sized for a thrust-to-weight ratio of 4 at omega_max and
  /// k_m = 0.02 k_f. Arm lengths, inertia and rotor constants are estimates.
  static VehicleParams defaults();

  /// Reads the flat config schema (SI units, angles in radians). Missing keys
  /// keep their defaults; k_f/k_m default to the thrust-ratio sizing above.
  static VehicleParams from_config(const KeyValueConfig& cfg);

  /// Throws DomainError naming the first violated invariant.
  void validate() const;

  /// Rotor thrust at omega_max.
  double max_rotor_thrust() const { return k_f * omega_max * omega_max; }
};

struct EulerAngles {
  double roll = 0.0;
  double pitch = 0.0;
  double yaw = 0.0;
};

struct BodyState {
  Vec3 position = Vec3::Zero();  ///< earth frame (m)
  Vec3 velocity = Vec3::Zero();  ///< body frame u, v, w (m/s)
  Vec3 attitude = Vec3::Zero();  ///< phi, theta, psi (rad)
  Vec3 rates = Vec3::Zero();     ///< body p, q, r (rad/s)

  EulerAngles euler() const { return {attitude.x(), attitude.y(), attitude.z()}; }
  bool finite() const;
};

struct BodyStateDerivative {
  Vec3 position_rate = Vec3::Zero();
  Vec3 velocity_rate = Vec3::Zero();
  Vec3 attitude_rate = Vec3::Zero();
  Vec3 rates_rate = Vec3::Zero();

  double max_abs() const;
};

struct ActuatorCommand {
  double omega1 = 0.0;
  double omega2 = 0.0;
  double omega3 = 0.0;
  double mu_a = 0.0;
  double mu_b = 0.0;

  std::array<double, 5> as_array() const { return {omega1, omega2, omega3, mu_a, mu_b}; }
  static ActuatorCommand from_array(const std::array<double, 5>& v) {
    return {v[0], v[1], v[2], v[3], v[4]};
  }
  double mean_tilt() const { return 0.5 * (mu_a + mu_b); }

  /// Throws DomainError if any channel is outside the actuator limits.
  void validate(const VehicleParams& params) const;
  /// Nearest command inside the actuator limits.
  ActuatorCommand clamped(const VehicleParams& params) const;
};

struct BodyWrench {
  Vec3 force = Vec3::Zero();   ///< body frame (N)
  Vec3 moment = Vec3::Zero();  ///< body frame (N m)
};

struct TrimSolution {
  double phi_trim = 0.0;
  double theta_trim = 0.0;
  double mu_trim = 0.0;
  double omega1_trim = 0.0;
  double omega2_trim = 0.0;
  double omega3_trim = 0.0;

  ActuatorCommand command() const {
    return {omega1_trim, omega2_trim, omega3_trim, mu_trim, mu_trim};
  }
  /// Motionless state at the trim attitude with the given position.
  BodyState state(const Vec3& position = Vec3::Zero()) const;
};

inline constexpr double kGimbalGuard = 1e-3;

/// Rotor forces and moments. Wing rotors carry independent tilts; with
/// mu_a == mu_b this is the symmetric tri-rotor wrench.
BodyWrench rotor_wrench(const ActuatorCommand& cmd, const VehicleParams& params);

/// Rigid-body equations with gravity, gyroscopic cross terms and Euler kinematics.
/// Throws SingularityError when |theta| >= pi/2 - kGimbalGuard.
BodyStateDerivative state_derivative(const BodyState& state, const BodyWrench& wrench,
                                     const VehicleParams& params);

/// One classical RK4 step of length params.dt with the command held constant.
BodyState integrate_step(const BodyState& state, const ActuatorCommand& cmd,
                         const VehicleParams& params);

/// Closed-form hover equilibrium. Throws InfeasibleTrimError if a trim rotor
/// speed exceeds omega_max.
TrimSolution solve_trim(const VehicleParams& params);

/// z_b . z_e = cos(phi) cos(theta).
double body_z_alignment(const EulerAngles& attitude);

/// Body-to-earth rotation (Z-Y-X Euler sequence).
Eigen::Matrix3d body_to_earth(const Vec3& attitude);

}  // namespace tiltrotor
