#include <doctest.h>

#include <cmath>
#include <cstring>
#include <numbers>
#include <random>

#include "test_support.hpp"
#include "tiltrotor/config.hpp"
#include "tiltrotor/errors.hpp"
#include "tiltrotor/vehicle.hpp"

using namespace tiltrotor;

namespace {

constexpr double kPi = std::numbers::pi;

// Symmetric-tilt wrench written out term by term, independent of rotor_wrench.
BodyWrench symmetric_wrench_reference(double w1, double w2, double w3, double mu, const VehicleParams& p) {
  const double s1 = w1 * w1, s2 = w2 * w2, s3 = w3 * w3;
  BodyWrench w;
  w.force.x() = p.k_f * (s2 + s3) * std::sin(mu);
  w.force.y() = 0.0;
  w.force.z() = -p.k_f * (s2 * std::cos(mu) + s3 * std::cos(mu) + s1);
  w.moment.x() = -p.l3 * p.k_f * (s2 - s3) * std::cos(mu);
  w.moment.y() = -p.l2 * p.k_f * (s2 + s3) * std::cos(mu) + p.l1 * p.k_f * s1;
  w.moment.z() = p.l3 * p.k_f * (s2 + s3) * std::sin(mu) - p.k_m * s1 + p.k_m * (s2 - s3) * std::cos(mu);
  return w;
}

BodyState integrate_horizon(BodyState s, const ActuatorCommand& cmd, VehicleParams p, double dt, double horizon) {
  p.dt = dt;
  const int steps = static_cast<int>(std::lround(horizon / dt));
  for (int i = 0; i < steps; ++i) s = integrate_step(s, cmd, p);
  return s;
}

double state_distance(const BodyState& a, const BodyState& b) {
  return std::max({(a.position - b.position).cwiseAbs().maxCoeff(), (a.velocity - b.velocity).cwiseAbs().maxCoeff(),
                   (a.attitude - b.attitude).cwiseAbs().maxCoeff(), (a.rates - b.rates).cwiseAbs().maxCoeff()});
}

}  // namespace

TEST_CASE("default parameters satisfy the thrust-to-weight sizing") {
  const VehicleParams p = VehicleParams::defaults();
  CHECK_NOTHROW(p.validate());
  CHECK(3.0 * p.max_rotor_thrust() == doctest::Approx(4.0 * p.mass * p.g).epsilon(1e-12));
  CHECK(p.k_m == doctest::Approx(0.02 * p.k_f));
}

TEST_CASE("invalid parameters are rejected") {
  VehicleParams p = VehicleParams::defaults();
  p.mass = 0.0;
  CHECK_THROWS_AS(p.validate(), DomainError);
  p = VehicleParams::defaults();
  p.mu_max = 2.0;
  CHECK_THROWS_AS(p.validate(), DomainError);
  p = VehicleParams::defaults();
  p.k_f *= 0.5;  // thrust-to-weight 2
  CHECK_THROWS_AS(p.validate(), DomainError);
}

TEST_CASE("rotor_wrench: no spin gives zero wrench") {
  const VehicleParams p = VehicleParams::defaults();
  const BodyWrench w = rotor_wrench({}, p);
  CHECK(w.force.norm() == 0.0);
  CHECK(w.moment.norm() == 0.0);
}

TEST_CASE("rotor_wrench: main rotor only") {
  const VehicleParams p = VehicleParams::defaults();
  const double s = 1500.0;
  const BodyWrench w = rotor_wrench({s, 0.0, 0.0, 0.3, 0.3}, p);
  CHECK(w.force.x() == 0.0);
  CHECK(w.force.y() == 0.0);
  CHECK(w.force.z() == doctest::Approx(-p.k_f * s * s));
  CHECK(w.moment.x() == 0.0);
  CHECK(w.moment.y() == doctest::Approx(p.l1 * p.k_f * s * s));
  CHECK(w.moment.z() == doctest::Approx(-p.k_m * s * s));
}

TEST_CASE("rotor_wrench: wing rotors fully tilted") {
  // Exact values from symbolic substitution at mu = pi/2, s = 1000 with the
  // default constants: Fx = 654/121, Mz = 327/242, all other components 0.
  const VehicleParams p = VehicleParams::defaults();
  const BodyWrench w = rotor_wrench({0.0, 1000.0, 1000.0, kPi / 2, kPi / 2}, p);
  CHECK(w.force.x() == doctest::Approx(654.0 / 121.0).epsilon(1e-13));
  CHECK(std::abs(w.force.y()) < 1e-14);
  CHECK(std::abs(w.force.z()) < 1e-12);
  CHECK(std::abs(w.moment.x()) < 1e-14);
  CHECK(std::abs(w.moment.y()) < 1e-12);
  CHECK(w.moment.z() == doctest::Approx(327.0 / 242.0).epsilon(1e-13));
}

TEST_CASE("rotor_wrench reduces to the symmetric form and keeps its symmetry") {
  std::mt19937_64 rng(11);
  const VehicleParams p = VehicleParams::defaults();
  std::uniform_real_distribution<double> speed(0.0, p.omega_max), tilt(p.mu_min, p.mu_max);
  for (int i = 0; i < 500; ++i) {
    const double w1 = speed(rng), w2 = speed(rng), w3 = speed(rng), mu = tilt(rng);
    const BodyWrench got = rotor_wrench({w1, w2, w3, mu, mu}, p);
    const BodyWrench ref = symmetric_wrench_reference(w1, w2, w3, mu, p);
    CHECK((got.force - ref.force).norm() < 1e-12);
    CHECK((got.moment - ref.moment).norm() < 1e-12);

    const BodyWrench sym = rotor_wrench({w1, w2, w2, mu, mu}, p);
    CHECK(sym.force.y() == 0.0);
    CHECK(std::abs(sym.moment.x()) < 1e-15);
  }
}

TEST_CASE("rotor_wrench rejects out-of-range commands") {
  const VehicleParams p = VehicleParams::defaults();
  CHECK_THROWS_AS(rotor_wrench({p.omega_max * 1.01, 0, 0, 0, 0}, p), DomainError);
  CHECK_THROWS_AS(rotor_wrench({-1.0, 0, 0, 0, 0}, p), DomainError);
  CHECK_THROWS_AS(rotor_wrench({0, 0, 0, -0.01, 0}, p), DomainError);
  CHECK_THROWS_AS(rotor_wrench({0, 0, 0, 0, 1.6}, p), DomainError);
  CHECK_THROWS_AS(rotor_wrench({std::nan(""), 0, 0, 0, 0}, p), DomainError);
}

TEST_CASE("state_derivative: free fall") {
  const VehicleParams p = VehicleParams::defaults();
  const BodyStateDerivative d = state_derivative(BodyState{}, BodyWrench{}, p);
  CHECK(d.velocity_rate.x() == 0.0);
  CHECK(d.velocity_rate.y() == 0.0);
  CHECK(d.velocity_rate.z() == doctest::Approx(p.g));
  CHECK(d.attitude_rate.norm() == 0.0);
  CHECK(d.rates_rate.norm() == 0.0);
  CHECK(d.position_rate.norm() == 0.0);
}

TEST_CASE("state_derivative: Euler kinematics is the identity at level attitude") {
  const VehicleParams p = VehicleParams::defaults();
  BodyState s;
  s.rates = Vec3(0.3, -0.7, 1.1);
  const BodyStateDerivative d = state_derivative(s, BodyWrench{}, p);
  CHECK(d.attitude_rate.x() == doctest::Approx(0.3));
  CHECK(d.attitude_rate.y() == doctest::Approx(-0.7));
  CHECK(d.attitude_rate.z() == doctest::Approx(1.1));
}

TEST_CASE("state_derivative: gyroscopic cross terms") {
  VehicleParams p = VehicleParams::defaults();
  BodyState s;
  s.rates = Vec3(1.0, 2.0, 3.0);
  const BodyStateDerivative d = state_derivative(s, BodyWrench{}, p);
  CHECK(d.rates_rate.x() == doctest::Approx(-(p.jz - p.jy) * 2.0 * 3.0 / p.jx));
  CHECK(d.rates_rate.y() == doctest::Approx(-(p.jx - p.jz) * 1.0 * 3.0 / p.jy));
  CHECK(d.rates_rate.z() == doctest::Approx(-(p.jy - p.jx) * 1.0 * 2.0 / p.jz));
}

TEST_CASE("state_derivative: body velocity maps to earth position rate") {
  const VehicleParams p = VehicleParams::defaults();
  BodyState s;
  s.attitude = Vec3(0.0, 0.0, kPi / 2);  // yawed 90 degrees: body x is earth y
  s.velocity = Vec3(2.0, 0.0, 0.0);
  const BodyStateDerivative d = state_derivative(s, BodyWrench{}, p);
  CHECK(std::abs(d.position_rate.x()) < 1e-15);
  CHECK(d.position_rate.y() == doctest::Approx(2.0));
}

TEST_CASE("state_derivative: gimbal guard") {
  const VehicleParams p = VehicleParams::defaults();
  BodyState s;
  s.attitude.y() = kPi / 2 - 5e-4;
  CHECK_THROWS_AS(state_derivative(s, BodyWrench{}, p), SingularityError);
  s.attitude.y() = -(kPi / 2 - 5e-4);
  CHECK_THROWS_AS(state_derivative(s, BodyWrench{}, p), SingularityError);
  s.attitude.y() = kPi / 2 - 2e-3;
  CHECK_NOTHROW(state_derivative(s, BodyWrench{}, p));
}

TEST_CASE("solve_trim: closed-form structure") {
  const VehicleParams p = VehicleParams::defaults();
  const TrimSolution t = solve_trim(p);
  CHECK(t.phi_trim == 0.0);
  CHECK(t.omega3_trim == t.omega2_trim);
  CHECK(t.theta_trim == doctest::Approx(std::atan(p.l2 * p.k_m / (p.l3 * (p.l1 + p.l2) * p.k_f))));
  CHECK(t.mu_trim == doctest::Approx(std::atan(p.l2 * p.k_m / (p.l1 * p.l3 * p.k_f))));
  CHECK(t.omega1_trim <= p.omega_max);
  CHECK(t.omega2_trim <= p.omega_max);
}

TEST_CASE("solve_trim: vanishing moment constant levels the vehicle") {
  VehicleParams p = VehicleParams::defaults();
  p.k_m = 1e-300;
  const TrimSolution t = solve_trim(p);
  CHECK(std::abs(t.theta_trim) < 1e-250);
  CHECK(std::abs(t.mu_trim) < 1e-250);
  CHECK(t.omega1_trim * t.omega1_trim == doctest::Approx(p.l2 * p.mass * p.g / ((p.l1 + p.l2) * p.k_f)));
}

TEST_CASE("solve_trim: infeasible trim") {
  VehicleParams p = VehicleParams::defaults();
  p.mu_max = 0.01;  // below the trim tilt of about 2.75 degrees
  CHECK_THROWS_AS(solve_trim(p), InfeasibleTrimError);
  // The main rotor never exceeds omega_max at trim (it carries at most mg of
  // the required 4mg/3 capacity), so the wing rotors are the binding limit.
  p = VehicleParams::defaults();
  CHECK(solve_trim(p).omega2_trim < p.omega_max);
}

TEST_CASE("trim residual vanishes for default and random parameters") {
  const auto residual = [](const VehicleParams& p) {
    const TrimSolution t = solve_trim(p);
    return state_derivative(t.state(), rotor_wrench(t.command(), p), p).max_abs();
  };
  CHECK(residual(VehicleParams::defaults()) < 1e-9);
  std::mt19937_64 rng(2024);
  for (int i = 0; i < 100; ++i) {
    const VehicleParams p = testing::random_valid_params(rng);
    const TrimSolution t = solve_trim(p);
    CHECK(t.phi_trim == 0.0);
    CHECK(t.omega3_trim == t.omega2_trim);
    CHECK(residual(p) < 1e-9);
  }
}

TEST_CASE("integrate_step: constant acceleration in free fall") {
  const VehicleParams p = VehicleParams::defaults();
  const BodyState s = integrate_step(BodyState{}, ActuatorCommand{}, p);
  CHECK(s.velocity.z() == doctest::Approx(p.g * p.dt).epsilon(1e-12));
  CHECK(s.position.z() == doctest::Approx(0.5 * p.g * p.dt * p.dt).epsilon(1e-12));
}

TEST_CASE("integrate_step: trim is held") {
  const VehicleParams p = VehicleParams::defaults();
  const TrimSolution t = solve_trim(p);
  BodyState s = t.state(Vec3(1.0, 2.0, -3.0));
  for (int i = 0; i < 100; ++i) s = integrate_step(s, t.command(), p);
  CHECK((s.position - Vec3(1.0, 2.0, -3.0)).norm() < 1e-6);
}

TEST_CASE("integrate_step: fourth-order convergence") {
  const VehicleParams p = VehicleParams::defaults();
  const TrimSolution t = solve_trim(p);
  ActuatorCommand cmd = t.command();
  cmd.omega1 *= 1.02;
  cmd.omega2 *= 1.01;
  cmd.mu_a += 0.05;
  BodyState s0 = t.state();
  s0.rates = Vec3(0.2, -0.1, 0.3);
  s0.velocity = Vec3(0.5, 0.0, -0.2);

  const double horizon = 1.0;
  const BodyState reference = integrate_horizon(s0, cmd, p, 0.01 / 100.0, horizon);
  const double e1 = state_distance(integrate_horizon(s0, cmd, p, 0.02, horizon), reference);
  const double e2 = state_distance(integrate_horizon(s0, cmd, p, 0.01, horizon), reference);
  const double order = std::log2(e1 / e2);
  MESSAGE("errors " << e1 << " " << e2 << " order " << order);
  CHECK(order >= 3.5);
  CHECK(order <= 4.5);
}

TEST_CASE("integrate_step: bit-identical for identical inputs") {
  const VehicleParams p = VehicleParams::defaults();
  BodyState s;
  s.attitude = Vec3(0.1, 0.2, 0.3);
  s.rates = Vec3(0.4, -0.5, 0.6);
  s.velocity = Vec3(1.0, -2.0, 0.5);
  const ActuatorCommand cmd{1200.0, 1100.0, 1000.0, 0.2, 0.4};
  const BodyState a = integrate_step(s, cmd, p);
  const BodyState b = integrate_step(s, cmd, p);
  CHECK(std::memcmp(a.position.data(), b.position.data(), sizeof(double) * 3) == 0);
  CHECK(std::memcmp(a.velocity.data(), b.velocity.data(), sizeof(double) * 3) == 0);
  CHECK(std::memcmp(a.attitude.data(), b.attitude.data(), sizeof(double) * 3) == 0);
  CHECK(std::memcmp(a.rates.data(), b.rates.data(), sizeof(double) * 3) == 0);
}

TEST_CASE("integrate_step: errors propagate") {
  const VehicleParams p = VehicleParams::defaults();
  BodyState s;
  s.attitude.y() = kPi / 2 - 1e-4;
  CHECK_THROWS_AS(integrate_step(s, ActuatorCommand{}, p), SingularityError);
  BodyState bad;
  bad.velocity.x() = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(integrate_step(bad, ActuatorCommand{}, p), DivergenceError);
}

TEST_CASE("body_z_alignment") {
  CHECK(body_z_alignment({0.0, 0.0, 0.0}) == 1.0);
  CHECK(std::abs(body_z_alignment({0.0, kPi / 2, 0.0})) < 1e-15);
  CHECK(body_z_alignment({kPi, 0.0, 0.0}) == doctest::Approx(-1.0));
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> angle(-20.0, 20.0);
  for (int i = 0; i < 1000; ++i) {
    const double a = body_z_alignment({angle(rng), angle(rng), angle(rng)});
    CHECK(a >= -1.0);
    CHECK(a <= 1.0);
  }
}

TEST_CASE("vehicle parameters load from flat config") {
  const auto cfg = KeyValueConfig::parse("# vehicle\nmass = 1.2\nl1 = 0.3\nomega_max = 2500\n", "vehicle.cfg");
  const VehicleParams p = VehicleParams::from_config(cfg);
  CHECK(p.mass == 1.2);
  CHECK(p.l1 == 0.3);
  CHECK(3.0 * p.max_rotor_thrust() == doctest::Approx(4.0 * 1.2 * p.g));

  const auto bad = KeyValueConfig::parse("mass = -1\n", "bad.cfg");
  CHECK_THROWS_AS(VehicleParams::from_config(bad), ConfigError);
  CHECK_THROWS_AS(KeyValueConfig::parse("mass 1\n"), ConfigError);
  CHECK_THROWS_AS(KeyValueConfig::parse("a = 1\na = 2\n"), ConfigError);
  CHECK_THROWS_WITH_AS(VehicleParams::from_config(KeyValueConfig::parse("mass = abc\n", "v.cfg")),
                       doctest::Contains("mass"), ConfigError);
}
