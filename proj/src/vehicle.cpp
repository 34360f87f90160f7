#include "tiltrotor/vehicle.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <string>

#include "tiltrotor/config.hpp"
#include "tiltrotor/errors.hpp"

namespace tiltrotor {

VehicleParams VehicleParams::defaults() {
  VehicleParams p;
  p.k_f = 4.0 * p.mass * p.g / (3.0 * p.omega_max * p.omega_max);
  p.k_m = 0.02 * p.k_f;
  return p;
}

VehicleParams VehicleParams::from_config(const KeyValueConfig& cfg) {
  VehicleParams p = defaults();
  p.mass = cfg.get_double("mass", p.mass);
  p.jx = cfg.get_double("jx", p.jx);
  p.jy = cfg.get_double("jy", p.jy);
  p.jz = cfg.get_double("jz", p.jz);
  p.l1 = cfg.get_double("l1", p.l1);
  p.l2 = cfg.get_double("l2", p.l2);
  p.l3 = cfg.get_double("l3", p.l3);
  p.g = cfg.get_double("g", p.g);
  p.omega_max = cfg.get_double("omega_max", p.omega_max);
  p.mu_min = cfg.get_double("mu_min", p.mu_min);
  p.mu_max = cfg.get_double("mu_max", p.mu_max);
  p.dt = cfg.get_double("dt", p.dt);
  p.k_f = cfg.get_double("k_f", 4.0 * p.mass * p.g / (3.0 * p.omega_max * p.omega_max));
  p.k_m = cfg.get_double("k_m", 0.02 * p.k_f);
  try {
    p.validate();
  } catch (const DomainError& e) {
    throw ConfigError(cfg.source() + ": " + e.what());
  }
  return p;
}

void VehicleParams::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw DomainError(std::string("invalid vehicle parameters: ") + what);
  };
  require(std::isfinite(mass) && mass > 0.0, "mass must be > 0");
  require(jx > 0.0 && jy > 0.0 && jz > 0.0, "moments of inertia must be > 0");
  require(l1 > 0.0 && l2 > 0.0 && l3 > 0.0, "arm lengths must be > 0");
  require(k_f > 0.0 && k_m > 0.0, "rotor constants must be > 0");
  require(g > 0.0, "g must be > 0");
  require(omega_max > 0.0, "omega_max must be > 0");
  require(0.0 <= mu_min && mu_min < mu_max && mu_max <= std::numbers::pi / 2.0,
          "tilt limits must satisfy 0 <= mu_min < mu_max <= pi/2");
  require(dt > 0.0, "dt must be > 0");
  // The default k_f sits exactly on the bound, so allow rounding slack.
  require(3.0 * k_f * omega_max * omega_max >= 4.0 * mass * g * (1.0 - 1e-12),
          "thrust-to-weight ratio below 4");
}

bool BodyState::finite() const {
  return position.allFinite() && velocity.allFinite() && attitude.allFinite() && rates.allFinite();
}

double BodyStateDerivative::max_abs() const {
  return std::max({position_rate.cwiseAbs().maxCoeff(), velocity_rate.cwiseAbs().maxCoeff(),
                   attitude_rate.cwiseAbs().maxCoeff(), rates_rate.cwiseAbs().maxCoeff()});
}

void ActuatorCommand::validate(const VehicleParams& params) const {
  const auto check_speed = [&](double w, const char* name) {
    if (!(w >= 0.0 && w <= params.omega_max)) {
      throw DomainError(std::string("rotor speed ") + name + " = " + std::to_string(w) +
                        " outside [0, omega_max]");
    }
  };
  const auto check_tilt = [&](double mu, const char* name) {
    if (!(mu >= params.mu_min && mu <= params.mu_max)) {
      throw DomainError(std::string("tilt ") + name + " = " + std::to_string(mu) +
                        " outside [mu_min, mu_max]");
    }
  };
  check_speed(omega1, "omega1");
  check_speed(omega2, "omega2");
  check_speed(omega3, "omega3");
  check_tilt(mu_a, "mu_a");
  check_tilt(mu_b, "mu_b");
}

ActuatorCommand ActuatorCommand::clamped(const VehicleParams& params) const {
  const auto speed = [&](double w) { return std::isfinite(w) ? std::clamp(w, 0.0, params.omega_max) : 0.0; };
  const auto tilt = [&](double mu) {
    return std::isfinite(mu) ? std::clamp(mu, params.mu_min, params.mu_max) : params.mu_min;
  };
  return {speed(omega1), speed(omega2), speed(omega3), tilt(mu_a), tilt(mu_b)};
}

BodyState TrimSolution::state(const Vec3& position) const {
  BodyState s;
  s.position = position;
  s.attitude = Vec3(phi_trim, theta_trim, 0.0);
  return s;
}

BodyWrench rotor_wrench(const ActuatorCommand& cmd, const VehicleParams& params) {
  cmd.validate(params);
  const double s1 = cmd.omega1 * cmd.omega1;
  const double s2 = cmd.omega2 * cmd.omega2;
  const double s3 = cmd.omega3 * cmd.omega3;
  const double ca = std::cos(cmd.mu_a), sa = std::sin(cmd.mu_a);
  const double cb = std::cos(cmd.mu_b), sb = std::sin(cmd.mu_b);
  const double kf = params.k_f, km = params.k_m;

  // Vertical and forward components of the two wing rotors (per unit k_f).
  const double vert_sum = s2 * ca + s3 * cb;
  const double vert_diff = s2 * ca - s3 * cb;
  const double fwd_sum = s2 * sa + s3 * sb;

  BodyWrench w;
  w.force = Vec3(kf * fwd_sum, 0.0, -kf * (vert_sum + s1));
  w.moment = Vec3(-params.l3 * kf * vert_diff,
                  -params.l2 * kf * vert_sum + params.l1 * kf * s1,
                  params.l3 * kf * fwd_sum - km * s1 + km * vert_diff);
  return w;
}

Eigen::Matrix3d body_to_earth(const Vec3& attitude) {
  const double cphi = std::cos(attitude.x()), sphi = std::sin(attitude.x());
  const double cth = std::cos(attitude.y()), sth = std::sin(attitude.y());
  const double cpsi = std::cos(attitude.z()), spsi = std::sin(attitude.z());
  Eigen::Matrix3d r;
  r << cth * cpsi, sphi * sth * cpsi - cphi * spsi, cphi * sth * cpsi + sphi * spsi,
      cth * spsi, sphi * sth * spsi + cphi * cpsi, cphi * sth * spsi - sphi * cpsi,
      -sth, sphi * cth, cphi * cth;
  return r;
}

BodyStateDerivative state_derivative(const BodyState& state, const BodyWrench& wrench,
                                     const VehicleParams& params) {
  const double phi = state.attitude.x();
  const double theta = state.attitude.y();
  if (!(std::abs(theta) < std::numbers::pi / 2.0 - kGimbalGuard)) {
    throw SingularityError("pitch " + std::to_string(theta) + " rad inside gimbal guard");
  }
  const double cphi = std::cos(phi), sphi = std::sin(phi);
  const double cth = std::cos(theta), sth = std::sin(theta);
  const double m = params.mass, g = params.g;

  BodyStateDerivative d;

  // Translational: force balance with gravity resolved in body axes.
  const Vec3 total_force(wrench.force.x() - m * g * sth,
                         wrench.force.y() + m * g * sphi * cth,
                         wrench.force.z() + m * g * cphi * cth);
  // The body frame rotates, so V is also transported by -omega x V.
  d.velocity_rate = total_force / m - state.rates.cross(state.velocity);

  // Rotational: principal-axis Euler equations.
  const double p = state.rates.x(), q = state.rates.y(), r = state.rates.z();
  d.rates_rate = Vec3((wrench.moment.x() - (params.jz - params.jy) * q * r) / params.jx,
                      (wrench.moment.y() - (params.jx - params.jz) * p * r) / params.jy,
                      (wrench.moment.z() - (params.jy - params.jx) * p * q) / params.jz);

  const double tth = sth / cth;
  d.attitude_rate = Vec3(p + sphi * tth * q + cphi * tth * r,
                         cphi * q - sphi * r,
                         (sphi * q + cphi * r) / cth);

  d.position_rate = body_to_earth(state.attitude) * state.velocity;
  return d;
}

namespace {

BodyState advance(const BodyState& s, const BodyStateDerivative& d, double h) {
  BodyState out;
  out.position = s.position + h * d.position_rate;
  out.velocity = s.velocity + h * d.velocity_rate;
  out.attitude = s.attitude + h * d.attitude_rate;
  out.rates = s.rates + h * d.rates_rate;
  return out;
}

}  // namespace

BodyState integrate_step(const BodyState& state, const ActuatorCommand& cmd,
                         const VehicleParams& params) {
  const BodyWrench wrench = rotor_wrench(cmd, params);
  const double h = params.dt;

  const BodyStateDerivative k1 = state_derivative(state, wrench, params);
  const BodyStateDerivative k2 = state_derivative(advance(state, k1, h / 2.0), wrench, params);
  const BodyStateDerivative k3 = state_derivative(advance(state, k2, h / 2.0), wrench, params);
  const BodyStateDerivative k4 = state_derivative(advance(state, k3, h), wrench, params);

  BodyState next;
  next.position = state.position + h / 6.0 * (k1.position_rate + 2.0 * k2.position_rate +
                                              2.0 * k3.position_rate + k4.position_rate);
  next.velocity = state.velocity + h / 6.0 * (k1.velocity_rate + 2.0 * k2.velocity_rate +
                                              2.0 * k3.velocity_rate + k4.velocity_rate);
  next.attitude = state.attitude + h / 6.0 * (k1.attitude_rate + 2.0 * k2.attitude_rate +
                                              2.0 * k3.attitude_rate + k4.attitude_rate);
  next.rates = state.rates + h / 6.0 * (k1.rates_rate + 2.0 * k2.rates_rate +
                                        2.0 * k3.rates_rate + k4.rates_rate);
  if (!next.finite()) throw DivergenceError("integration produced a non-finite state");
  return next;
}

TrimSolution solve_trim(const VehicleParams& params) {
  params.validate();
  const double l1 = params.l1, l2 = params.l2, l3 = params.l3;
  const double kf = params.k_f, km = params.k_m;
  const double mg = params.mass * params.g;

  TrimSolution t;
  t.phi_trim = 0.0;
  t.theta_trim = std::atan(l2 * km / (l3 * (l1 + l2) * kf));
  t.mu_trim = std::atan(l2 * km / (l1 * l3 * kf));
  const double cth = std::cos(t.theta_trim);
  t.omega1_trim = std::sqrt(l2 * mg * cth / ((l1 + l2) * kf));
  t.omega2_trim = std::sqrt(l1 * mg * cth / (2.0 * (l1 + l2) * kf * std::cos(t.mu_trim)));
  t.omega3_trim = t.omega2_trim;

  if (t.omega1_trim > params.omega_max || t.omega2_trim > params.omega_max) {
    throw InfeasibleTrimError("trim rotor speed exceeds omega_max");
  }
  if (t.mu_trim < params.mu_min || t.mu_trim > params.mu_max) {
    throw InfeasibleTrimError("trim tilt outside [mu_min, mu_max]");
  }
  return t;
}

double body_z_alignment(const EulerAngles& attitude) {
  return std::cos(attitude.roll) * std::cos(attitude.pitch);
}

}  // namespace tiltrotor
