#include "tiltrotor/hover_env.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "tiltrotor/errors.hpp"

namespace tiltrotor {

void RewardWeights::validate() const {
  if (!(w_v >= 0.0 && w_omega >= 0.0 && r_proj_scale >= 0.0 && w_p >= 0.0 && track_cap > 0.0 && w_psi >= 0.0 &&
        arrival_bonus >= 0.0)) {
    throw DomainError("reward weights must be non-negative");
  }
}

RewardWeights RewardWeights::from_config(const KeyValueConfig& cfg) {
  RewardWeights w;
  w.w_v = cfg.get_double("w_v", w.w_v);
  w.w_omega = cfg.get_double("w_omega", w.w_omega);
  w.r_proj_scale = cfg.get_double("r_proj_scale", w.r_proj_scale);
  w.w_p = cfg.get_double("w_p", w.w_p);
  w.track_cap = cfg.get_double("track_cap", w.track_cap);
  w.w_psi = cfg.get_double("w_psi", w.w_psi);
  w.arrival_bonus = cfg.get_double("arrival_bonus", w.arrival_bonus);
  try {
    w.validate();
  } catch (const DomainError& e) {
    throw ConfigError(cfg.source() + ": " + e.what());
  }
  return w;
}

EpisodeConfig EpisodeConfig::from_config(const KeyValueConfig& cfg) {
  EpisodeConfig c;
  c.horizon = static_cast<int>(cfg.get_int("horizon", c.horizon));
  c.arrival_radius = cfg.get_double("arrival_radius", c.arrival_radius);
  c.crash_attitude = cfg.get_double("crash_attitude_deg", c.crash_attitude * 180.0 / std::numbers::pi) *
                     std::numbers::pi / 180.0;
  c.position_bound = cfg.get_double("position_bound", c.position_bound);
  c.spawn_position_noise = cfg.get_double("spawn_position_noise", c.spawn_position_noise);
  c.spawn_attitude_noise = cfg.get_double("spawn_attitude_noise", c.spawn_attitude_noise);
  c.spawn_velocity_noise = cfg.get_double("spawn_velocity_noise", c.spawn_velocity_noise);
  c.spawn_rate_noise = cfg.get_double("spawn_rate_noise", c.spawn_rate_noise);
  c.symmetric_walk = cfg.get_bool("symmetric_walk", c.symmetric_walk);
  try {
    c.validate();
  } catch (const DomainError& e) {
    throw ConfigError(cfg.source() + ": " + e.what());
  }
  return c;
}

void EpisodeConfig::validate() const {
  if (!(k >= 0.0)) throw DomainError("target range k must be >= 0");
  if (horizon <= 0) throw DomainError("horizon T must be > 0");
  if (!(arrival_radius > 0.0)) throw DomainError("arrival radius must be > 0");
  if (!(crash_attitude > 0.0 && crash_attitude < std::numbers::pi / 2.0 - kGimbalGuard)) {
    throw DomainError("crash attitude bound must lie inside the gimbal guard");
  }
  if (!(position_bound > 0.0)) throw DomainError("position bound must be > 0");
}

std::string_view to_string(TerminationStatus status) {
  switch (status) {
    case TerminationStatus::running: return "running";
    case TerminationStatus::horizon: return "horizon";
    case TerminationStatus::crash_attitude: return "crash_attitude";
    case TerminationStatus::out_of_bounds: return "out_of_bounds";
    case TerminationStatus::diverged: return "diverged";
  }
  return "unknown";
}

std::string_view to_string(FlightMode mode) { return mode == FlightMode::hover ? "hover" : "cruise"; }

FlightMode classify_mode(double tilt) {
  return tilt <= kHoverTiltLimit ? FlightMode::hover : FlightMode::cruise;
}

ActionVector normalize_command(const ActuatorCommand& cmd, const VehicleParams& params) {
  const auto speed = [&](double w) { return 2.0 * w / params.omega_max - 1.0; };
  const auto tilt = [&](double mu) {
    return 2.0 * (mu - params.mu_min) / (params.mu_max - params.mu_min) - 1.0;
  };
  return {speed(cmd.omega1), speed(cmd.omega2), speed(cmd.omega3), tilt(cmd.mu_a), tilt(cmd.mu_b)};
}

ActuatorCommand denormalize_action(const ActionVector& action, const VehicleParams& params) {
  for (const double a : action) {
    if (!(a >= -1.0 && a <= 1.0)) throw DomainError("action entry outside [-1, 1]: " + std::to_string(a));
  }
  const auto speed = [&](double a) { return 0.5 * (a + 1.0) * params.omega_max; };
  const auto tilt = [&](double a) {
    return params.mu_min + 0.5 * (a + 1.0) * (params.mu_max - params.mu_min);
  };
  // Guard the endpoints against rounding past the limits.
  return ActuatorCommand{speed(action[0]), speed(action[1]), speed(action[2]), tilt(action[3]),
                         tilt(action[4])}
      .clamped(params);
}

Observation build_observation(const BodyState& state, const Vec3& target,
                              const ActuatorCommand& prev, const VehicleParams& params) {
  Observation o{};
  // Yaw is unbounded in the state; present it wrapped to (-pi, pi].
  const double yaw = std::remainder(state.attitude.z(), 2.0 * std::numbers::pi);
  o[obs_layout::attitude + 0] = state.attitude.x();
  o[obs_layout::attitude + 1] = state.attitude.y();
  o[obs_layout::attitude + 2] = yaw;
  for (int i = 0; i < 3; ++i) {
    o[obs_layout::velocity + i] = 0.25 * std::tanh(state.velocity[i]);
    o[obs_layout::rates + i] = std::tanh(state.rates[i]);
    o[obs_layout::delta_position + i] = target[i] - state.position[i];
  }
  const ActionVector prev_n = normalize_command(prev, params);
  for (std::size_t i = 0; i < kActionSize; ++i) o[obs_layout::prev_command + i] = prev_n[i];
  return o;
}

double step_reward(const BodyState& state, const RewardWeights& weights) {
  return body_z_alignment(state.euler()) * weights.r_proj_scale - weights.w_v * state.velocity.norm() -
         weights.w_omega * state.rates.norm();
}

Vec3 advance_target(const Vec3& target, double k, std::mt19937_64& rng, bool symmetric) {
  if (!(k >= 0.0)) throw DomainError("target range k must be >= 0");
  if (k == 0.0) return target;
  std::uniform_real_distribution<double> u(symmetric ? -k : 0.0, k);
  const double dx = u(rng);
  const double dy = u(rng);
  const double dz = u(rng);
  return target + Vec3(dx, dy, dz);
}

TerminationStatus check_termination(const BodyState& state, int step, const EpisodeConfig& config) {
  if (!state.finite()) return TerminationStatus::diverged;
  if (std::abs(state.attitude.x()) > config.crash_attitude ||
      std::abs(state.attitude.y()) > config.crash_attitude) {
    return TerminationStatus::crash_attitude;
  }
  if (state.position.norm() > config.position_bound) return TerminationStatus::out_of_bounds;
  if (step >= config.horizon) return TerminationStatus::horizon;
  return TerminationStatus::running;
}

HoverEnv::HoverEnv(VehicleParams params, RewardWeights weights, EpisodeConfig config)
    : params_(params), weights_(weights), config_(config), trim_(solve_trim(params)), rng_(config.seed) {
  params_.validate();
  weights_.validate();
  config_.validate();
  reset(config_.seed);
}

Observation HoverEnv::reset(std::uint64_t seed) {
  rng_.seed(seed);
  return reset();
}

Observation HoverEnv::reset() {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const auto draw = [&](double half_width) -> Vec3 {
    // Three draws regardless of width keeps the stream aligned across configs.
    const double a = u(rng_), b = u(rng_), c = u(rng_);
    return Vec3(a, b, c) * half_width;
  };
  state_ = trim_.state();
  state_.position = draw(config_.spawn_position_noise);
  state_.attitude += draw(config_.spawn_attitude_noise);
  state_.velocity = draw(config_.spawn_velocity_noise);
  state_.rates = draw(config_.spawn_rate_noise);
  target_ = Vec3::Zero();
  prev_command_ = trim_.command();
  step_ = 0;
  done_ = false;
  return observation();
}

Observation HoverEnv::observation() const {
  return build_observation(state_, target_, prev_command_, params_);
}

StepResult HoverEnv::step(const ActionVector& action) {
  if (done_) throw std::logic_error("HoverEnv::step called on a finished episode; call reset()");
  const ActuatorCommand cmd = denormalize_action(action, params_);

  StepResult result;
  ++step_;
  result.info.step = step_;
  bool diverged = false;
  try {
    state_ = integrate_step(state_, cmd, params_);
  } catch (const SingularityError&) {
    diverged = true;
  } catch (const DivergenceError&) {
    diverged = true;
  }
  prev_command_ = cmd;

  result.info.tilt = cmd.mean_tilt();
  result.info.mode = classify_mode(result.info.tilt);
  if (diverged) {
    result.info.status = TerminationStatus::diverged;
  } else {
    result.info.status = check_termination(state_, step_, config_);
  }

  if (result.info.status == TerminationStatus::diverged) {
    result.reward = 0.0;
    result.info.delta_position = Vec3::Zero();
  } else {
    result.info.delta_position = target_ - state_.position;
    const double heading = std::remainder(state_.attitude.z(), 2.0 * std::numbers::pi);
    result.reward = step_reward(state_, weights_) -
                    weights_.w_p * std::min(result.info.delta_position.norm(), weights_.track_cap) -
                    weights_.w_psi * std::abs(heading);
  }

  result.info.crashed = result.info.status == TerminationStatus::crash_attitude ||
                        result.info.status == TerminationStatus::out_of_bounds ||
                        result.info.status == TerminationStatus::diverged;
  result.done = result.info.status != TerminationStatus::running;
  done_ = result.done;

  if (!result.done && result.info.delta_position.norm() <= config_.arrival_radius) {
    result.info.arrived = true;
    if (config_.random_walk && config_.k > 0.0) {
      target_ = advance_target(target_, config_.k, rng_, config_.symmetric_walk);
      result.reward += weights_.arrival_bonus;
    }
  }

  result.observation = diverged ? Observation{} : observation();
  return result;
}

}  // namespace tiltrotor
