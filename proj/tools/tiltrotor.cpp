// Command-line entry point. Every subcommand writes its outputs and a run
// manifest into the output directory (--out-dir, or TILTROTOR_OUT_DIR).

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <memory>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "tiltrotor/checkpoint.hpp"
#include "tiltrotor/config.hpp"
#include "tiltrotor/csv.hpp"
#include "tiltrotor/errors.hpp"
#include "tiltrotor/evaluation.hpp"
#include "tiltrotor/kernels.hpp"
#include "tiltrotor/pid.hpp"
#include "tiltrotor/planner.hpp"
#include "tiltrotor/telemetry.hpp"
#include "tiltrotor/training.hpp"

#ifndef TILTROTOR_VERSION
#define TILTROTOR_VERSION "dev"
#endif

namespace fs = std::filesystem;
using namespace tiltrotor;
using nlohmann::json;

namespace {

struct Common {
  std::string vehicle_cfg;
  std::string train_cfg;
  std::string pid_cfg;
  std::string out_dir;
  std::uint64_t seed = 0;
};

KeyValueConfig load_optional(const std::string& path) {
  if (path.empty()) return KeyValueConfig::parse("", "<defaults>");
  return KeyValueConfig::load(path);
}

struct Loaded {
  VehicleParams vehicle;
  PpoConfig ppo;
  RewardWeights weights;
  EpisodeConfig episode;
  DualLoopGains gains;
};

Loaded load_configs(const Common& c) {
  Loaded l;
  l.vehicle = VehicleParams::from_config(load_optional(c.vehicle_cfg));
  const KeyValueConfig train = load_optional(c.train_cfg);
  l.ppo = PpoConfig::from_config(train);
  l.ppo.seed = c.seed;
  l.weights = RewardWeights::from_config(train);
  l.episode = EpisodeConfig::from_config(train);
  l.gains = c.pid_cfg.empty() ? DualLoopGains::defaults() : DualLoopGains::from_config(KeyValueConfig::load(c.pid_cfg));
  return l;
}

std::string file_hash_or(const std::string& path, const char* fallback) {
  return path.empty() ? fallback : hash_file_hex(path);
}

class Manifest {
 public:
  Manifest(std::string subcommand, const Common& c, int argc, char** argv) : common_(c) {
    j_["tool"] = "tiltrotor";
    j_["version"] = TILTROTOR_VERSION;
    j_["subcommand"] = std::move(subcommand);
    std::vector<std::string> args(argv, argv + argc);
    j_["argv"] = args;
    j_["seed"] = c.seed;
    j_["kernel_backend"] = kernels::active_backend() == kernels::Backend::avx2 ? "avx2" : "scalar";
    j_["compiler"] = __VERSION__;
    const std::time_t now = std::time(nullptr);
    char stamp[32];
    std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    j_["started_utc"] = stamp;
    json configs;
    configs["vehicle"] = {{"path", c.vehicle_cfg}, {"fnv1a64", file_hash_or(c.vehicle_cfg, "defaults")}};
    configs["train"] = {{"path", c.train_cfg}, {"fnv1a64", file_hash_or(c.train_cfg, "defaults")}};
    configs["pid"] = {{"path", c.pid_cfg}, {"fnv1a64", file_hash_or(c.pid_cfg, "defaults")}};
    j_["configs"] = configs;
  }

  void input(const std::string& name, const std::string& path) {
    j_["inputs"][name] = {{"path", path}, {"fnv1a64", hash_file_hex(path)}};
  }
  void output(const fs::path& path) { j_["outputs"].push_back(path.string()); }
  json& extra() { return j_["results"]; }

  void write() const {
    const fs::path path = fs::path(common_.out_dir) / (j_["subcommand"].get<std::string>() + ".manifest.json");
    std::ofstream out(path);
    if (!out) throw IoError("cannot write manifest " + path.string());
    out << j_.dump(2) << '\n';
  }

 private:
  const Common& common_;
  json j_;
};

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    const double v = std::stod(item, &used);
    if (used != item.size()) throw CLI::ValidationError("list", "bad number '" + item + "'");
    out.push_back(v);
  }
  return out;
}

ExecutionOptions execution_options(const Loaded& l, double trained_range, std::uint64_t seed) {
  ExecutionOptions e;
  e.episode = l.episode;
  e.trained_range = trained_range;
  e.seed = seed;
  return e;
}

// ---------------------------------------------------------------------------

int run_trim(const Common& c, Manifest& m) {
  const Loaded l = load_configs(c);
  const TrimSolution t = solve_trim(l.vehicle);
  const BodyStateDerivative d = state_derivative(t.state(), rotor_wrench(t.command(), l.vehicle), l.vehicle);
  const double residual = d.max_abs();
  constexpr double deg = 180.0 / std::numbers::pi;
  std::printf("phi_trim = %.17g rad\n", t.phi_trim);
  std::printf("theta_trim = %.17g rad (%.6f deg)\n", t.theta_trim, t.theta_trim * deg);
  std::printf("mu_trim = %.17g rad (%.6f deg)\n", t.mu_trim, t.mu_trim * deg);
  std::printf("omega1_trim = %.17g rad/s\n", t.omega1_trim);
  std::printf("omega2_trim = omega3_trim = %.17g rad/s\n", t.omega2_trim);
  std::printf("residual max|xdot| = %.3e (%s)\n", residual, residual < 1e-9 ? "ok" : "FAILED");
  m.extra() = {{"theta_trim", t.theta_trim}, {"mu_trim", t.mu_trim}, {"residual", residual}};
  return residual < 1e-9 ? 0 : 1;
}

struct TrainArgs {
  double k = 10.0;
  std::string schedule = "coarse";
  long long budget = 2'000'000;
  std::string init;
};

int run_train(const Common& c, const TrainArgs& a, Manifest& m) {
  const Loaded l = load_configs(c);
  HoverTrainer trainer(l.vehicle, l.weights, l.episode, l.ppo);
  trainer.on_iteration([](const TrainingCurveRow& r) {
    if (r.iteration % 10 == 0) {
      std::printf("iter %d k %g steps %lld reward %.1f\n", r.iteration, r.k, r.env_steps, r.eval_reward);
      std::fflush(stdout);
    }
  });
  PolicyParams init;
  if (!a.init.empty()) {
    init = load_checkpoint(a.init).params;
    m.input("init", a.init);
  } else {
    init = PolicyParams::random(derive_seed(c.seed, 1), normalize_command(solve_trim(l.vehicle).command(), l.vehicle));
  }
  TrainingBudget budget;
  budget.max_env_steps = a.budget;
  const ProgressiveResult res = progressive_train(a.k, init, trainer, a.schedule == "fine" ? ScheduleMode::fine : ScheduleMode::coarse, budget);

  json stages = json::array();
  for (const StageResult& s : res.stages) {
    std::printf("stage k=%g converged=%d best=%.1f final=%.1f steps=%lld\n", s.k, s.result.converged ? 1 : 0,
                s.result.best_eval_reward, s.result.final_eval_reward, s.result.env_steps);
    stages.push_back({{"k", s.k},
                      {"converged", s.result.converged},
                      {"best_eval_reward", s.result.best_eval_reward},
                      {"env_steps", s.result.env_steps}});
  }
  Checkpoint ck;
  ck.params = res.params;
  ck.metadata = {{"seed", std::to_string(c.seed)},
                 {"trained_range", format_double(a.k)},
                 {"schedule", a.schedule},
                 {"vehicle_config", file_hash_or(c.vehicle_cfg, "defaults")},
                 {"train_config", file_hash_or(c.train_cfg, "defaults")}};
  const fs::path ckpt = fs::path(c.out_dir) / "policy.json";
  const fs::path curve = fs::path(c.out_dir) / "training_curve.csv";
  save_checkpoint(ckpt, ck);
  write_training_curve(curve, trainer.curve());
  m.output(ckpt);
  m.output(curve);
  m.extra() = {{"converged", res.converged}, {"stages", stages}};
  std::printf("wrote %s\n", ckpt.c_str());
  return 0;
}

struct PathArgs {
  std::string trajectory = "data/transition_40m.csv";
  double spacing = 10.0;
  std::string checkpoint;
  std::string controller = "st3m";
  double trained_range = 10.0;
};

int run_eval(const Common& c, const PathArgs& a, Manifest& m) {
  const Loaded l = load_configs(c);
  m.input("trajectory", a.trajectory);
  const PlannedPath path = balance_path(read_trajectory_csv(a.trajectory), a.spacing);
  const ExecutionOptions opt = execution_options(l, a.trained_range, c.seed);
  ExecutionResult res;
  if (a.controller == "pid") {
    DualLoopController pid(l.vehicle, l.gains);
    res = execute_path(path, l.vehicle, l.weights, opt,
                       [&](const BodyState& s, const Vec3& target, const Observation&) { return pid.update(s, target); });
  } else {
    if (a.checkpoint.empty()) throw CLI::ValidationError("--checkpoint", "required for the st3m controller");
    m.input("checkpoint", a.checkpoint);
    res = st3m_execute(path, load_checkpoint(a.checkpoint).params, l.vehicle, l.weights, opt);
  }
  if (res.spacing_warning) std::fprintf(stderr, "warning: path spacing exceeds the trained range\n");
  const MetricsRecord rec = run_episode_metrics(res.log, path, a.controller);
  const fs::path metrics = fs::path(c.out_dir) / "metrics.csv";
  const fs::path log = fs::path(c.out_dir) / (a.controller + "_log.csv");
  export_csv(std::vector<MetricsRecord>{rec}, metrics);
  export_csv(res.log, log);
  m.output(metrics);
  m.output(log);
  std::printf("%s: status=%s completed=%d max_error=%.3f m mean_error=%.3f m duration=%.2f s\n",
              a.controller.c_str(), std::string(to_string(res.log.status)).c_str(), rec.completed ? 1 : 0,
              rec.max_position_error, rec.mean_position_error, rec.duration);
  return 0;
}

int run_compare(const Common& c, const PathArgs& a, Manifest& m) {
  const Loaded l = load_configs(c);
  m.input("trajectory", a.trajectory);
  m.input("checkpoint", a.checkpoint);
  ComparisonOptions opt;
  opt.execution = execution_options(l, a.trained_range, c.seed);
  opt.weights = l.weights;
  opt.spacing = a.spacing;
  const Comparison cmp = compare_controllers(read_trajectory_csv(a.trajectory), load_checkpoint(a.checkpoint).params,
                                             l.gains, l.vehicle, opt);
  const fs::path out = fs::path(c.out_dir) / "compare.csv";
  export_csv(cmp.records, out);
  export_csv(cmp.pid_log, fs::path(c.out_dir) / "pid_log.csv");
  export_csv(cmp.st3m_log, fs::path(c.out_dir) / "st3m_log.csv");
  m.output(out);
  m.output(fs::path(c.out_dir) / "pid_log.csv");
  m.output(fs::path(c.out_dir) / "st3m_log.csv");
  std::printf("%-6s %10s %10s %10s %8s %8s\n", "ctrl", "|pitch|deg", "max_err_m", "mean_err_m", "hover", "done");
  for (const MetricsRecord& r : cmp.records) {
    std::printf("%-6s %10.3f %10.3f %10.3f %8.3f %8d\n", r.controller.c_str(), r.mean_abs_pitch_deg,
                r.max_position_error, r.mean_position_error, r.hover_fraction, r.completed ? 1 : 0);
  }
  return 0;
}

struct SweepArgs {
  std::string trajectory = "data/transition_40m.csv";
  std::vector<std::string> policies;  ///< k=path
  std::string k_values = "0,5,10";
  std::string seeds = "0,1,2,3,4";
};

int run_sweep(const Common& c, const SweepArgs& a, Manifest& m) {
  const Loaded l = load_configs(c);
  m.input("trajectory", a.trajectory);
  std::map<double, PolicyParams> controllers;
  for (const std::string& spec : a.policies) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos) throw CLI::ValidationError("--policy", "expected K=PATH, got '" + spec + "'");
    const double k = parse_list(spec.substr(0, eq)).at(0);
    const std::string path = spec.substr(eq + 1);
    controllers[k] = load_checkpoint(path).params;
    m.input("policy_k" + spec.substr(0, eq), path);
  }
  SweepOptions opt;
  opt.execution = execution_options(l, 10.0, 0);
  opt.weights = l.weights;
  opt.seeds.clear();
  for (const double s : parse_list(a.seeds)) opt.seeds.push_back(static_cast<std::uint64_t>(s) + c.seed);
  const TradeoffTable table = sweep_target_range(parse_list(a.k_values), controllers, read_trajectory_csv(a.trajectory),
                                                 l.vehicle, opt);
  const fs::path out = fs::path(c.out_dir) / "sweep.csv";
  export_csv(table, out);
  m.output(out);
  std::printf("%6s %10s %10s %10s %8s %8s\n", "k", "time_s", "max_err_m", "mean_err_m", "hover", "complete");
  for (const TradeoffRow& r : table.rows) {
    if (!r.present) {
      std::printf("%6g %10s\n", r.k, "(no controller)");
      continue;
    }
    std::printf("%6g %10.2f %10.3f %10.3f %8.3f %8.2f\n", r.k, r.time_cost, r.max_error, r.mean_error,
                r.hover_fraction, r.completion_rate);
  }
  std::printf("max error non-decreasing in k: %s\n", table.max_error_nondecreasing ? "yes" : "no");
  m.extra() = {{"max_error_nondecreasing", table.max_error_nondecreasing}};
  return 0;
}

int run_plan(const Common& c, const PathArgs& a, Manifest& m) {
  m.input("trajectory", a.trajectory);
  const PlannedPath path = balance_path(read_trajectory_csv(a.trajectory), a.spacing);
  const fs::path out = fs::path(c.out_dir) / "path.csv";
  write_path_csv(path, out);
  m.output(out);
  std::printf("%zu hover points, max gap %.3f m\n", path.size(), path.max_gap());
  return 0;
}

struct BridgeArgs {
  double duration = 1.0;
  double rate = 100.0;
  double drop = 0.0;
  int sim_port = 0;
  int zero_after = 0;
  bool external = false;
  std::string controller = "pid";
};

int run_bridge(const Common& c, const BridgeArgs& a, Manifest& m) {
  const Loaded l = load_configs(c);
  const TrimSolution trim = solve_trim(l.vehicle);
  telemetry::BridgeOptions opt;
  opt.duration = a.duration;
  opt.rate_hz = a.rate;
  opt.drop_probability = a.drop;
  opt.seed = c.seed;

  std::unique_ptr<telemetry::SimulatorEndpoint> sim;
  std::uint16_t port = static_cast<std::uint16_t>(a.sim_port);
  const Vec3 hold_point(0.0, 0.0, -5.0);
  if (!a.external) {
    telemetry::SimulatorOptions so;
    so.rate_hz = a.rate;
    so.port = port;
    so.zero_throttle_after = a.zero_after;
    sim = std::make_unique<telemetry::SimulatorEndpoint>(l.vehicle, trim.state(hold_point), so);
    sim->start();
    port = sim->port();
  }
  // The in-process simulator also serves as the state source for the PID
  // baseline; the wire itself only carries commands down and acceleration up.
  DualLoopController pid(l.vehicle, l.gains);
  const telemetry::BridgeController controller = [&](const std::optional<telemetry::TelemetrySample>&) {
    if (a.controller == "pid" && sim) return pid.update(sim->state(), hold_point);
    return trim.command();
  };
  const telemetry::SessionStats s = telemetry::bridge_loop(controller, port, opt);
  std::optional<telemetry::SimulatorStats> ss;
  if (sim) {
    sim->stop();
    ss = sim->stats();
  }

  std::printf("ticks %zu sent %zu dropped %zu received %zu decode_errors %zu degraded %d\n", s.ticks, s.sent, s.dropped,
              s.received, s.decode_errors, s.degraded ? 1 : 0);
  std::printf("jitter mean %.1f us p99 %.1f us max %.1f us (period %.1f us)\n", s.jitter.mean_abs * 1e6,
              s.jitter.p99_abs * 1e6, s.jitter.max_abs * 1e6, 1e6 / a.rate);
  json stats = {{"ticks", s.ticks},
                {"sent", s.sent},
                {"dropped", s.dropped},
                {"received", s.received},
                {"decode_errors", s.decode_errors},
                {"regressions_discarded", s.regressions_discarded},
                {"send_failures", s.send_failures},
                {"degraded", s.degraded},
                {"jitter_mean_s", s.jitter.mean_abs},
                {"jitter_p99_s", s.jitter.p99_abs},
                {"jitter_max_s", s.jitter.max_abs}};
  if (ss) {
    std::printf("simulator ticks %zu applied %zu stale %zu diverged %d\n", ss->ticks, ss->commands_applied,
                ss->stale_ticks, ss->diverged ? 1 : 0);
    stats["simulator"] = {{"ticks", ss->ticks},
                          {"commands_applied", ss->commands_applied},
                          {"stale_ticks", ss->stale_ticks},
                          {"telemetry_sent", ss->telemetry_sent},
                          {"diverged", ss->diverged}};
  }
  const fs::path out = fs::path(c.out_dir) / "bridge_stats.json";
  std::ofstream(out) << stats.dump(2) << '\n';
  m.output(out);
  m.extra() = stats;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tilt-rotor VTOL transition control: simulation, training, evaluation, telemetry"};
  app.set_version_flag("--version", TILTROTOR_VERSION);
  app.require_subcommand(1);

  Common common;
  const char* env_out = std::getenv("TILTROTOR_OUT_DIR");
  common.out_dir = env_out ? env_out : "out";

  const auto add_common = [&](CLI::App* sub, bool training) {
    sub->add_option("--vehicle", common.vehicle_cfg, "vehicle parameter file")->check(CLI::ExistingFile);
    sub->add_option("--pid", common.pid_cfg, "PID gain file")->check(CLI::ExistingFile);
    if (training) sub->add_option("--train", common.train_cfg, "PPO, reward and episode settings")->check(CLI::ExistingFile);
    sub->add_option("--seed", common.seed, "run seed");
    sub->add_option("--out-dir", common.out_dir, "output directory (env TILTROTOR_OUT_DIR)");
  };

  auto* trim = app.add_subcommand("trim", "solve and verify the hover trim");
  add_common(trim, false);

  TrainArgs train_args;
  auto* train = app.add_subcommand("train", "progressive training up to target range K");
  add_common(train, true);
  train->add_option("--k", train_args.k, "final target range K (m)")->check(CLI::NonNegativeNumber);
  train->add_option("--schedule", train_args.schedule, "coarse {0,K/2,K} or fine {0,1,..,K}")
      ->check(CLI::IsMember({"coarse", "fine"}));
  train->add_option("--budget", train_args.budget, "rollout steps per stage")->check(CLI::PositiveNumber);
  train->add_option("--init", train_args.init, "start from this checkpoint")->check(CLI::ExistingFile);

  PathArgs path_args;
  const auto add_path = [&](CLI::App* sub) {
    sub->add_option("--trajectory", path_args.trajectory, "trajectory CSV (x,y,z[,roll,pitch,yaw])")
        ->check(CLI::ExistingFile);
    sub->add_option("--spacing", path_args.spacing, "hover-point spacing (m)")->check(CLI::PositiveNumber);
  };
  auto* eval = app.add_subcommand("eval", "fly a path with one controller and emit metrics");
  add_common(eval, true);
  add_path(eval);
  eval->add_option("--controller", path_args.controller)->check(CLI::IsMember({"st3m", "pid"}));
  eval->add_option("--checkpoint", path_args.checkpoint)->check(CLI::ExistingFile);
  eval->add_option("--trained-range", path_args.trained_range, "K the checkpoint was trained for");

  auto* compare = app.add_subcommand("compare", "PID baseline and learned controller on the same path");
  add_common(compare, true);
  add_path(compare);
  compare->add_option("--checkpoint", path_args.checkpoint)->required()->check(CLI::ExistingFile);
  compare->add_option("--trained-range", path_args.trained_range);

  SweepArgs sweep_args;
  auto* sweep = app.add_subcommand("sweep", "target-range trade-off table");
  add_common(sweep, true);
  sweep->add_option("--trajectory", sweep_args.trajectory)->check(CLI::ExistingFile);
  sweep->add_option("--policy", sweep_args.policies, "K=checkpoint, repeatable");
  sweep->add_option("--k-values", sweep_args.k_values, "comma-separated target ranges");
  sweep->add_option("--seeds", sweep_args.seeds, "comma-separated spawn seed offsets");

  auto* plan = app.add_subcommand("plan", "resample a trajectory into balanced hover points");
  add_common(plan, false);
  add_path(plan);

  BridgeArgs bridge_args;
  auto* bridge = app.add_subcommand("bridge", "telemetry session against the loopback simulator endpoint");
  add_common(bridge, false);
  bridge->add_option("--duration", bridge_args.duration, "s")->check(CLI::NonNegativeNumber);
  bridge->add_option("--rate", bridge_args.rate, "Hz")->check(CLI::PositiveNumber);
  bridge->add_option("--drop", bridge_args.drop, "injected downlink drop probability")->check(CLI::Range(0.0, 1.0));
  bridge->add_option("--sim-port", bridge_args.sim_port, "simulator port (0 picks one)")->check(CLI::Range(0, 65535));
  bridge->add_flag("--external", bridge_args.external, "connect to a simulator already listening on --sim-port");
  bridge->add_option("--zero-after", bridge_args.zero_after, "simulator cuts throttle after N missed ticks");
  bridge->add_option("--controller", bridge_args.controller)->check(CLI::IsMember({"pid", "trim"}));

  if (argc < 2) {
    std::cerr << app.help();
    return 2;
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    (void)app.exit(e);
    return 2;
  }

  try {
    fs::create_directories(common.out_dir);
    CLI::App* sub = app.get_subcommands().front();
    Manifest manifest(sub->get_name(), common, argc, argv);
    int rc = 0;
    if (sub == trim) rc = run_trim(common, manifest);
    else if (sub == train) rc = run_train(common, train_args, manifest);
    else if (sub == eval) rc = run_eval(common, path_args, manifest);
    else if (sub == compare) rc = run_compare(common, path_args, manifest);
    else if (sub == sweep) rc = run_sweep(common, sweep_args, manifest);
    else if (sub == plan) rc = run_plan(common, path_args, manifest);
    else if (sub == bridge) rc = run_bridge(common, bridge_args, manifest);
    manifest.write();
    return rc;
  } catch (const CLI::ValidationError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
