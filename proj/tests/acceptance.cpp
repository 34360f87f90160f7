// Acceptance run: one PASS/FAIL line per criterion. Pass criterion numbers as
// arguments to run a subset (e.g. `acceptance 1 2 12`).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "test_support.hpp"
#include "tiltrotor/config.hpp"
#include "tiltrotor/csv.hpp"
#include "tiltrotor/evaluation.hpp"
#include "tiltrotor/pid.hpp"
#include "tiltrotor/planner.hpp"
#include "tiltrotor/ppo.hpp"
#include "tiltrotor/telemetry.hpp"
#include "tiltrotor/training.hpp"

using namespace tiltrotor;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// --- 1, 2: trim -------------------------------------------------------------

std::vector<VehicleParams> trim_parameter_sets() {
  std::mt19937_64 rng(2024);
  std::vector<VehicleParams> sets{VehicleParams::defaults()};
  while (sets.size() < 100) sets.push_back(testing::random_valid_params(rng));
  return sets;
}

Outcome trim_exactness() {
  const auto sets = trim_parameter_sets();
  const auto t0 = Clock::now();
  double worst = 0.0;
  for (const VehicleParams& p : sets) {
    const TrimSolution t = solve_trim(p);
    worst = std::max(worst, state_derivative(t.state(), rotor_wrench(t.command(), p), p).max_abs());
  }
  const double elapsed = seconds_since(t0);
  return {worst <= 1e-9 && elapsed < 1.0,
          fmt("max |xdot| = %.3e over %zu parameter sets (tol 1e-9), %.3f s", worst, sets.size(), elapsed)};
}

Outcome trim_structure() {
  std::size_t bad = 0;
  const auto sets = trim_parameter_sets();
  for (const VehicleParams& p : sets) {
    const TrimSolution t = solve_trim(p);
    if (t.phi_trim != 0.0 || t.omega3_trim != t.omega2_trim) ++bad;
  }
  return {bad == 0, fmt("phi_trim == 0 and omega3 == omega2 exactly in %zu/%zu sets", sets.size() - bad, sets.size())};
}

// --- 3: integrator order -------------------------------------------------------

BodyState integrate_with_dt(BodyState s, const ActuatorCommand& cmd, VehicleParams p, double dt, double horizon) {
  p.dt = dt;
  const int n = static_cast<int>(std::lround(horizon / dt));
  for (int i = 0; i < n; ++i) s = integrate_step(s, cmd, p);
  return s;
}

double distance(const BodyState& a, const BodyState& b) {
  return std::max({(a.position - b.position).cwiseAbs().maxCoeff(), (a.velocity - b.velocity).cwiseAbs().maxCoeff(),
                   (a.attitude - b.attitude).cwiseAbs().maxCoeff(), (a.rates - b.rates).cwiseAbs().maxCoeff()});
}

Outcome integrator_order() {
  const auto t0 = Clock::now();
  const VehicleParams p = VehicleParams::defaults();
  const TrimSolution t = solve_trim(p);
  ActuatorCommand cmd = t.command();
  cmd.omega1 *= 1.03;
  cmd.omega3 *= 0.99;
  cmd.mu_b += 0.04;
  BodyState s0 = t.state();
  s0.rates = Vec3(-0.15, 0.2, 0.1);
  s0.velocity = Vec3(0.3, -0.2, 0.1);
  const double horizon = 1.0;
  const BodyState ref = integrate_with_dt(s0, cmd, p, 1e-4, horizon);
  const double e1 = distance(integrate_with_dt(s0, cmd, p, 0.02, horizon), ref);
  const double e2 = distance(integrate_with_dt(s0, cmd, p, 0.01, horizon), ref);
  const double order = std::log2(e1 / e2);
  const double elapsed = seconds_since(t0);
  return {order >= 3.5 && order <= 4.5 && elapsed < 5.0,
          fmt("measured order %.3f (errors %.3e, %.3e; band [3.5, 4.5]), %.2f s", order, e1, e2, elapsed)};
}

// --- 4: gradient check ---------------------------------------------------------

Outcome gradient_check() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(77);
  std::normal_distribution<double> z(0.0, 1.0);
  PolicyParams params = PolicyParams::random(9);
  params.normalizer.enabled = false;
  for (double& w : params.policy.parameters()) w += 0.02 * z(rng);
  for (double& w : params.value.parameters()) w += 0.02 * z(rng);

  const std::size_t n = 10;
  RolloutBatch b;
  b.features.resize(n * kObservationSize);
  for (double& x : b.features) x = z(rng);
  b.raw_actions.resize(n * kActionSize);
  b.log_probs.resize(n);
  b.advantages.resize(n);
  b.returns.resize(n);
  b.rewards.assign(n, 0.0);
  b.values.assign(n, 0.0);
  b.dones.assign(n, 0);
  Mlp::Workspace ws;
  params.policy.forward(b.features, n, ws);
  std::uniform_real_distribution<double> jitter(-0.05, 0.05);
  for (std::size_t i = 0; i < n; ++i) {
    std::array<double, kActionSize> mean{}, log_std{};
    split_policy_output(ws.output().subspan(i * 2 * kActionSize, 2 * kActionSize), mean, log_std);
    for (std::size_t j = 0; j < kActionSize; ++j) b.raw_actions[i * kActionSize + j] = mean[j] + std::exp(log_std[j]) * z(rng);
    b.log_probs[i] =
        gaussian_log_density(std::span(b.raw_actions).subspan(i * kActionSize, kActionSize), mean, log_std) + jitter(rng);
    b.advantages[i] = z(rng);
    b.returns[i] = z(rng);
  }
  PpoConfig cfg;
  cfg.entropy_coef = 0.01;
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  PpoLossWorkspace lws;
  std::vector<double> gp(params.policy.parameter_count(), 0.0), gv(params.value.parameter_count(), 0.0);
  ppo_loss(params, b, idx, cfg, gp, gv, lws);

  double worst = 0.0;
  std::size_t checked = 0;
  const auto check = [&](std::span<double> theta, const std::vector<double>& analytic) {
    const double h = 1e-6;
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const double saved = theta[i];
      theta[i] = saved + h;
      const double up = ppo_loss(params, b, idx, cfg, {}, {}, lws).total;
      theta[i] = saved - h;
      const double down = ppo_loss(params, b, idx, cfg, {}, {}, lws).total;
      theta[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      worst = std::max(worst, std::abs(numeric - analytic[i]) / std::max(1.0, std::abs(numeric)));
      ++checked;
    }
  };
  check(params.policy.parameters(), gp);
  check(params.value.parameters(), gv);
  const double elapsed = seconds_since(t0);
  return {worst < 1e-4 && elapsed < 30.0,
          fmt("max relative error %.3e over %zu parameters, batch of %zu (tol 1e-4), %.2f s", worst, checked, n, elapsed)};
}

// --- 5: GAE ----------------------------------------------------------------------

Outcome gae_oracle() {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> z(0.0, 1.0);
  std::bernoulli_distribution done(0.08);
  std::uniform_int_distribution<std::size_t> len(1, 100);
  PpoConfig cfg;
  cfg.gamma = 0.97;
  cfg.lambda = 0.9;
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = trial == 0 ? 100 : len(rng);
    RolloutBatch b;
    for (std::size_t t = 0; t < n; ++t) {
      b.rewards.push_back(z(rng));
      b.values.push_back(z(rng));
      b.dones.push_back(done(rng));
    }
    // One or two segments.
    const std::size_t cut = n > 1 && trial % 2 ? n / 2 : n;
    b.segment_ends = cut < n ? std::vector<std::size_t>{cut, n} : std::vector<std::size_t>{n};
    for (std::size_t s = 0; s < b.segment_ends.size(); ++s) b.bootstrap_values.push_back(z(rng));
    const RolloutBatch out = compute_gae(b, cfg);

    std::size_t begin = 0;
    for (std::size_t s = 0; s < b.segment_ends.size(); ++s) {
      const std::size_t end = b.segment_ends[s];
      for (std::size_t t = begin; t < end; ++t) {
        double adv = 0.0, weight = 1.0;
        for (std::size_t l = t; l < end; ++l) {
          const double next = l + 1 < end ? b.values[l + 1] : b.bootstrap_values[s];
          adv += weight * (b.rewards[l] + cfg.gamma * next * (b.dones[l] ? 0.0 : 1.0) - b.values[l]);
          if (b.dones[l]) break;
          weight *= cfg.gamma * cfg.lambda;
        }
        worst = std::max(worst, std::abs(adv - out.advantages[t]));
      }
      begin = end;
    }
  }
  return {worst < 1e-10, fmt("max |GAE - double sum| = %.3e over 200 batches of length <= 100 (tol 1e-10)", worst)};
}

// --- 6, 7, 9: learning -----------------------------------------------------------

ActionVector trim_action(const VehicleParams& p) { return normalize_command(solve_trim(p).command(), p); }

Outcome hover_training() {
  const auto t0 = Clock::now();
  const VehicleParams vp = VehicleParams::defaults();
  int converged = 0;
  std::string per_seed;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    PpoConfig ppo;
    ppo.seed = seed;
    HoverTrainer trainer(vp, RewardWeights{}, EpisodeConfig{}, ppo);
    TrainingBudget budget;
    budget.max_env_steps = 2'000'000;
    const HrmResult r = trainer.hrm_train(0.0, PolicyParams::random(seed, trim_action(vp)), budget, ppo.promotion_reward);
    if (r.converged && r.final_eval_reward > ppo.promotion_reward) ++converged;
    per_seed += fmt(" seed%llu:%s@%lld(R=%.0f)", static_cast<unsigned long long>(seed), r.converged ? "yes" : "no",
                    r.env_steps, r.converged ? r.final_eval_reward : r.best_eval_reward);
    std::fflush(stdout);
  }
  return {converged >= 3, fmt("%d/5 seeds exceed 700 within 2e6 steps (need 3);", converged) + per_seed +
                              fmt(", %.0f s", seconds_since(t0))};
}

struct TrackingSetup {
  VehicleParams vehicle;
  PpoConfig ppo;
  RewardWeights weights;
  EpisodeConfig episode;
};

TrackingSetup tracking_setup() {
  const KeyValueConfig cfg = KeyValueConfig::load("configs/train.cfg");
  TrackingSetup s;
  s.vehicle = VehicleParams::from_config(KeyValueConfig::load("configs/vehicle.cfg"));
  s.ppo = PpoConfig::from_config(cfg);
  s.weights = RewardWeights::from_config(cfg);
  s.episode = EpisodeConfig::from_config(cfg);
  return s;
}

std::optional<ProgressiveResult> g_progressive;

Outcome transition_execution() {
  const auto t0 = Clock::now();
  const TrackingSetup s = tracking_setup();
  HoverTrainer trainer(s.vehicle, s.weights, s.episode, s.ppo);
  TrainingBudget budget;
  budget.max_env_steps = 2'000'000;
  g_progressive = progressive_train(10.0, PolicyParams::random(s.ppo.seed, trim_action(s.vehicle)), trainer,
                                    ScheduleMode::coarse, budget);
  std::string stages;
  for (const StageResult& st : g_progressive->stages) {
    stages += fmt(" k=%g:%s(best %.0f, %lld steps)", st.k, st.result.converged ? "conv" : "budget",
                  st.result.best_eval_reward, st.result.env_steps);
  }
  const double train_time = seconds_since(t0);

  const Trajectory traj = read_trajectory_csv("data/transition_40m.csv");
  const PlannedPath path = balance_path(traj, 10.0);
  int clean = 0;
  double mean_error_sum = 0.0;
  bool finite = true;
  std::string runs;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    ExecutionOptions opt;
    opt.episode = s.episode;
    opt.seed = seed;
    const ExecutionResult r = st3m_execute(path, g_progressive->params, s.vehicle, s.weights, opt);
    const MetricsRecord m = run_episode_metrics(r.log, path, "st3m");
    if (!r.log.crashed()) ++clean;
    finite = finite && std::isfinite(m.mean_position_error);
    mean_error_sum += m.mean_position_error;
    runs += fmt(" [seed %llu %s reached %zu/%zu mean_err %.2f m]", static_cast<unsigned long long>(seed),
                std::string(to_string(r.log.status)).c_str(), r.log.points_reached, path.size(), m.mean_position_error);
  }

  // Comparison table: PID and the learned controller on the same path.
  ComparisonOptions copt;
  copt.execution.episode = s.episode;
  copt.weights = s.weights;
  copt.spacing = 10.0;
  const Comparison cmp = compare_controllers(traj, g_progressive->params,
                                             DualLoopGains::from_config(KeyValueConfig::load("configs/pid_gains.cfg")),
                                             s.vehicle, copt);
  std::printf("    table: controller,mean_abs_pitch_deg,max_position_error_m,mean_position_error_m,hover_fraction,completed\n");
  for (const MetricsRecord& m : cmp.records) {
    std::printf("    table: %s,%s,%s,%s,%s,%d\n", m.controller.c_str(), format_double(m.mean_abs_pitch_deg).c_str(),
                format_double(m.max_position_error).c_str(), format_double(m.mean_position_error).c_str(),
                format_double(m.hover_fraction).c_str(), m.completed ? 1 : 0);
  }
  return {clean >= 4 && finite,
          fmt("%d/5 executions without crash (need 4), mean error %.3f m;", clean, mean_error_sum / 5.0) + runs +
              "; training" + stages + fmt(" in %.0f s", train_time)};
}

Outcome tradeoff_sweep() {
  if (!g_progressive) return {false, "needs the progressive controllers from criterion 7 (run 7 first)"};
  const TrackingSetup s = tracking_setup();
  std::map<double, PolicyParams> controllers;
  for (const StageResult& st : g_progressive->stages) controllers[st.k] = st.result.params;
  SweepOptions opt;
  opt.execution.episode = s.episode;
  opt.weights = s.weights;
  opt.seeds = {0, 1, 2};
  const TradeoffTable t = sweep_target_range({0.0, 5.0, 10.0}, controllers, read_trajectory_csv("data/transition_40m.csv"),
                                             s.vehicle, opt);
  bool ok = t.rows.size() == 3;
  std::string rows;
  for (const TradeoffRow& r : t.rows) {
    ok = ok && r.present && std::isfinite(r.time_cost) && std::isfinite(r.max_error) && std::isfinite(r.hover_fraction);
    rows += fmt(" [k=%g time %.2f s max_err %.2f m hover %.3f]", r.k, r.time_cost, r.max_error, r.hover_fraction);
  }
  export_csv(t, std::filesystem::temp_directory_path() / "acceptance_sweep.csv");
  return {ok, std::string("axes emitted for k in {0,5,10};") + rows +
                  "; max error non-decreasing in k: " + (t.max_error_nondecreasing ? "yes" : "no") +
                  " (diagnostic, not gated)"};
}

// --- 8: PID ------------------------------------------------------------------------

Outcome pid_sanity() {
  const VehicleParams p = VehicleParams::defaults();
  const DualLoopGains gains = DualLoopGains::from_config(KeyValueConfig::load("configs/pid_gains.cfg"));
  bool ok = true;
  std::string detail;
  for (const Vec3& target : {Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, -1)}) {
    DualLoopController ctl(p, gains);
    BodyState s = ctl.trim().state();
    const double duration = 20.0;
    double last_outside = 0.0;
    int saturated = 0;
    bool diverged = false;
    for (int i = 1; i <= static_cast<int>(duration / p.dt); ++i) {
      const ActuatorCommand cmd = ctl.update(s, target);
      if (ctl.last().saturated) ++saturated;
      try {
        s = integrate_step(s, cmd, p);
      } catch (const std::exception&) {
        diverged = true;
        break;
      }
      if ((s.position - target).norm() > 0.1) last_outside = i * p.dt;
    }
    const double final_error = (s.position - target).norm();
    ok = ok && !diverged && last_outside < 10.0 && final_error < 0.1 && saturated == 0;
    detail += fmt(" [step (%g,%g,%g): within 0.1 m after %.2f s, final %.4f m, %d saturated ticks]", target.x(),
                  target.y(), target.z(), last_outside, final_error, saturated);
  }
  return {ok, "1 m steps with shipped gains;" + detail};
}

// --- 10: wire protocol -----------------------------------------------------------

Outcome wire_protocol() {
  using namespace telemetry;
  std::mt19937_64 rng(10);
  std::uniform_int_distribution<std::uint32_t> bits;
  std::size_t mismatches = 0;
  for (int i = 0; i < 100000; ++i) {
    CommandFrame f;
    f.seq = static_cast<std::uint16_t>(bits(rng));
    for (float& v : f.payload) v = std::bit_cast<float>(bits(rng));
    const auto d = decode_command(encode(f));
    if (!d.ok() || d.frame.seq != f.seq || std::memcmp(d.frame.payload.data(), f.payload.data(), sizeof f.payload) != 0) {
      ++mismatches;
    }
  }
  const VehicleParams p = VehicleParams::defaults();
  const TrimSolution trim = solve_trim(p);
  SimulatorEndpoint sim(p, trim.state(Vec3(0, 0, -5)), {});
  sim.start();
  BridgeOptions opt;
  opt.duration = 1.0;
  opt.rate_hz = 100.0;
  const SessionStats s = bridge_loop([&](const auto&) { return trim.command(); }, sim.port(), opt);
  sim.stop();
  const double period = 1.0 / opt.rate_hz;
  const bool ok = mismatches == 0 && s.sent >= 98 && s.sent <= 102 && s.jitter.p99_abs < 0.1 * period;
  return {ok, fmt("%zu/100000 round-trip mismatches; 1 s session sent %zu frames (100 +- 2), received %zu, "
                  "p99 jitter %.1f us (< %.0f us)",
                  mismatches, s.sent, s.received, s.jitter.p99_abs * 1e6, 0.1 * period * 1e6)};
}

// --- 11: cost function -----------------------------------------------------------

Outcome cost_function() {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> z(0.0, 1.0);
  double worst_perfect = 0.0, worst_oracle = 0.0, min_j = std::numeric_limits<double>::infinity();
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 5 + trial % 20;
    PlannedPath path;
    for (std::size_t i = 0; i < n; ++i) {
      path.points.emplace_back(5.0 * z(rng), 5.0 * z(rng), z(rng));
      path.attitudes.emplace_back(0.1 * z(rng), 0.1 * z(rng), 0.1 * z(rng));
    }
    Mat3 a, b;
    for (int i = 0; i < 9; ++i) {
      a(i / 3, i % 3) = z(rng);
      b(i / 3, i % 3) = z(rng);
    }
    CostWeights w;
    w.q1 = a * a.transpose();
    w.q2 = b * b.transpose();

    EpisodeLog perfect, noisy;
    for (std::size_t i = 0; i < n; ++i) {
      EpisodeRow r;
      r.target_index = i;
      r.time = 0.01 * static_cast<double>(i + 1);
      r.position = path.points[i];
      r.attitude = path.attitudes[i];
      perfect.rows.push_back(r);
      r.position += Vec3(z(rng), z(rng), z(rng));
      r.attitude += 0.1 * Vec3(z(rng), z(rng), z(rng));
      noisy.rows.push_back(r);
    }
    perfect.points_reached = noisy.points_reached = n;
    worst_perfect = std::max(worst_perfect, std::abs(tracking_cost(perfect, path, w).j));

    double oracle = 0.0;
    for (const EpisodeRow& r : noisy.rows) {
      const Vec3 dp = r.position - path.points[r.target_index];
      const Vec3 di = r.attitude - path.attitudes[r.target_index];
      for (int p = 0; p < 3; ++p) {
        for (int q = 0; q < 3; ++q) oracle += dp[p] * w.q1(p, q) * dp[q] + di[p] * w.q2(p, q) * di[q];
      }
    }
    const double j = tracking_cost(noisy, path, w).j;
    worst_oracle = std::max(worst_oracle, std::abs(j - oracle));
    min_j = std::min(min_j, j);
  }
  return {worst_perfect == 0.0 && worst_oracle < 1e-10 && min_j >= 0.0,
          fmt("perfect-log J max %.3e; |J - oracle| max %.3e (tol 1e-10); min J %.3e over 50 random PSD weightings",
              worst_perfect, worst_oracle, min_j)};
}

// --- 12: mode boundary -------------------------------------------------------------

Outcome mode_boundary() {
  const double edge = 60.0 * std::numbers::pi / 180.0;
  const FlightMode at = classify_mode(edge);
  const FlightMode above = classify_mode(edge + 1e-9);
  return {at == FlightMode::hover && above == FlightMode::cruise,
          fmt("60 deg -> %s, 60 deg + 1e-9 rad -> %s", std::string(to_string(at)).c_str(),
              std::string(to_string(above)).c_str())};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"trim exactness", trim_exactness},
      {"trim structure", trim_structure},
      {"integrator order", integrator_order},
      {"gradient check", gradient_check},
      {"GAE oracle", gae_oracle},
      {"hover training", hover_training},
      {"transition execution", transition_execution},
      {"PID sanity", pid_sanity},
      {"trade-off sweep", tradeoff_sweep},
      {"wire protocol", wire_protocol},
      {"cost function", cost_function},
      {"mode boundary", mode_boundary},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
  // Cheap criteria first; 9 reuses the controllers trained in 7.
  const std::vector<int> order{1, 2, 3, 4, 5, 8, 10, 11, 12, 6, 7, 9};

  int failures = 0;
  for (const int id : order) {
    if (!selected.empty() && !selected.count(id)) continue;
    const auto& [name, run] = criteria[static_cast<std::size_t>(id - 1)];
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::printf("C%-2d %s  %s: %s\n", id, o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
