#include "tiltrotor/pid.hpp"

#include <algorithm>
#include <cmath>

#include "tiltrotor/config.hpp"
#include "tiltrotor/errors.hpp"

namespace tiltrotor {

void PidGains::validate() const {
  if (!(kp >= 0.0 && ki >= 0.0 && kd >= 0.0)) throw DomainError("PID gains must be >= 0");
  if (!(integral_limit > 0.0 && output_limit > 0.0)) throw DomainError("PID clamps must be > 0");
}

PidOutput pid_step(double error, const PidChannelState& state, const PidGains& gains, double dt) {
  if (!(dt > 0.0)) throw DomainError("pid_step: dt must be > 0");
  PidOutput out;
  out.state.integral = std::clamp(state.integral + error * dt, -gains.integral_limit, gains.integral_limit);
  const double derivative = state.primed ? (error - state.prev_error) / dt : 0.0;
  out.state.prev_error = error;
  out.state.primed = true;
  const double u = gains.kp * error + gains.ki * out.state.integral + gains.kd * derivative;
  out.output = std::clamp(u, -gains.output_limit, gains.output_limit);
  return out;
}

DualLoopGains DualLoopGains::defaults() {
  DualLoopGains g;
  g.outer_x = {1.0, 0.05, 1.8, 2.0, 4.0};
  g.outer_y = g.outer_x;
  g.outer_z = {2.0, 0.3, 2.5, 2.0, 5.0};
  g.inner_roll = {64.0, 0.0, 16.0, 1.0, 200.0};
  g.inner_pitch = g.inner_roll;
  g.inner_yaw = {16.0, 0.0, 8.0, 1.0, 50.0};
  g.max_tilt_reference = 0.5;
  return g;
}

namespace {

PidGains channel_from_config(const KeyValueConfig& cfg, const std::string& name, PidGains g) {
  g.kp = cfg.get_double(name + ".kp", g.kp);
  g.ki = cfg.get_double(name + ".ki", g.ki);
  g.kd = cfg.get_double(name + ".kd", g.kd);
  g.integral_limit = cfg.get_double(name + ".integral_limit", g.integral_limit);
  g.output_limit = cfg.get_double(name + ".output_limit", g.output_limit);
  try {
    g.validate();
  } catch (const DomainError& e) {
    throw ConfigError(cfg.source() + ": " + name + ": " + e.what());
  }
  return g;
}

double wrap_angle(double a) { return std::remainder(a, 2.0 * std::numbers::pi); }

}  // namespace

DualLoopGains DualLoopGains::from_config(const KeyValueConfig& cfg) {
  DualLoopGains g = defaults();
  g.outer_x = channel_from_config(cfg, "outer_x", g.outer_x);
  g.outer_y = channel_from_config(cfg, "outer_y", g.outer_y);
  g.outer_z = channel_from_config(cfg, "outer_z", g.outer_z);
  g.inner_roll = channel_from_config(cfg, "inner_roll", g.inner_roll);
  g.inner_pitch = channel_from_config(cfg, "inner_pitch", g.inner_pitch);
  g.inner_yaw = channel_from_config(cfg, "inner_yaw", g.inner_yaw);
  g.max_tilt_reference = cfg.get_double("max_tilt_reference", g.max_tilt_reference);
  if (!(g.max_tilt_reference > 0.0 && g.max_tilt_reference < std::numbers::pi / 2.0)) {
    throw ConfigError(cfg.source() + ": max_tilt_reference must lie in (0, pi/2)");
  }
  return g;
}

void DualLoopGains::validate() const {
  for (const PidGains* g : {&outer_x, &outer_y, &outer_z, &inner_roll, &inner_pitch, &inner_yaw}) g->validate();
  if (!(max_tilt_reference > 0.0 && max_tilt_reference < std::numbers::pi / 2.0)) {
    throw DomainError("max_tilt_reference must lie in (0, pi/2)");
  }
}

MixerResult mix_wrench(double force_z, const Vec3& moment, const VehicleParams& params) {
  const double kf = params.k_f, km = params.k_m;
  const double l1 = params.l1, l2 = params.l2, l3 = params.l3;

  // Unknowns in squared-speed units: a = W1^2, B/D = sum/difference of the wing
  // rotors' vertical parts, C = sum of their forward parts (split evenly).
  const double thrust = -force_z / kf;
  double a = (moment.y() / kf + l2 * thrust) / (l1 + l2);
  bool saturated = false;
  if (a < 0.0) {
    a = 0.0;
    saturated = true;
  }
  const double vert_sum = thrust - a;
  const double vert_diff = -moment.x() / (l3 * kf);
  const double fwd_sum = (moment.z() + km * a - km * vert_diff) / (l3 * kf);

  const auto wing = [&](double vertical, double forward, double& omega, double& mu) {
    double w2 = std::hypot(vertical, forward);
    mu = std::atan2(forward, vertical);
    if (mu < params.mu_min || mu > params.mu_max) {
      mu = std::clamp(mu, params.mu_min, params.mu_max);
      // Keep the achievable projection onto the clipped thrust direction.
      w2 = std::max(0.0, vertical * std::cos(mu) + forward * std::sin(mu));
      saturated = true;
    }
    omega = std::sqrt(w2);
  };

  MixerResult r;
  r.command.omega1 = std::sqrt(a);
  wing(0.5 * (vert_sum + vert_diff), 0.5 * fwd_sum, r.command.omega2, r.command.mu_a);
  wing(0.5 * (vert_sum - vert_diff), 0.5 * fwd_sum, r.command.omega3, r.command.mu_b);
  for (double* w : {&r.command.omega1, &r.command.omega2, &r.command.omega3}) {
    if (!std::isfinite(*w)) {
      *w = 0.0;
      saturated = true;
    } else if (*w > params.omega_max) {
      *w = params.omega_max;
      saturated = true;
    }
  }
  r.command = r.command.clamped(params);
  r.saturated = saturated;
  return r;
}

DualLoopOutput dual_loop_control(const BodyState& state, const Vec3& target, const DualLoopState& loop_state,
                                 const DualLoopGains& gains, const VehicleParams& params,
                                 const TrimSolution& trim, double dt) {
  DualLoopOutput out;
  out.state = loop_state;

  // Outer loop: earth-frame position errors to desired accelerations (z down).
  const Vec3 error = target - state.position;
  const PidOutput ax = pid_step(error.x(), loop_state.outer[0], gains.outer_x, dt);
  const PidOutput ay = pid_step(error.y(), loop_state.outer[1], gains.outer_y, dt);
  const PidOutput az = pid_step(error.z(), loop_state.outer[2], gains.outer_z, dt);
  out.state.outer = {ax.state, ay.state, az.state};

  const double psi = state.attitude.z();
  const double a_fwd = std::cos(psi) * ax.output + std::sin(psi) * ay.output;
  const double a_right = -std::sin(psi) * ax.output + std::cos(psi) * ay.output;
  const double g = params.g;
  const double lim = gains.max_tilt_reference;

  // Nose-down pitch tilts the rotor thrust forward; right roll tilts it to +y.
  out.reference.pitch = std::clamp(trim.theta_trim - std::atan(a_fwd / g), -lim, lim);
  out.reference.roll = std::clamp(std::atan(a_right / g), -lim, lim);
  out.reference.yaw = 0.0;

  // Body z force: trim force scaled by the vertical demand and corrected for the
  // current tilt relative to trim.
  const double trim_alignment = std::cos(trim.phi_trim) * std::cos(trim.theta_trim);
  const double alignment = std::max(std::cos(state.attitude.x()) * std::cos(state.attitude.y()), 0.5);
  const double trim_force_z = -params.mass * g * std::cos(trim.theta_trim);
  out.reference.force_z = trim_force_z * (1.0 - az.output / g) * trim_alignment / alignment;

  // Inner loop: attitude errors to moment demands.
  const PidOutput mr = pid_step(out.reference.roll - state.attitude.x(), loop_state.inner[0], gains.inner_roll, dt);
  const PidOutput mp =
      pid_step(out.reference.pitch - state.attitude.y(), loop_state.inner[1], gains.inner_pitch, dt);
  const PidOutput my =
      pid_step(wrap_angle(out.reference.yaw - psi), loop_state.inner[2], gains.inner_yaw, dt);
  out.state.inner = {mr.state, mp.state, my.state};
  out.moment_demand = Vec3(params.jx * mr.output, params.jy * mp.output, params.jz * my.output);

  const MixerResult mixed = mix_wrench(out.reference.force_z, out.moment_demand, params);
  out.command = mixed.command;
  out.saturated = mixed.saturated;
  return out;
}

DualLoopController::DualLoopController(VehicleParams params, DualLoopGains gains)
    : params_(params), gains_(gains), trim_(solve_trim(params)) {
  gains_.validate();
}

ActuatorCommand DualLoopController::update(const BodyState& state, const Vec3& target) {
  last_ = dual_loop_control(state, target, state_, gains_, params_, trim_, params_.dt);
  state_ = last_.state;
  return last_.command;
}

}  // namespace tiltrotor
