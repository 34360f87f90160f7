#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <vector>

#include "tiltrotor/hover_env.hpp"
#include "tiltrotor/policy.hpp"
#include "tiltrotor/ppo.hpp"

namespace tiltrotor {

enum class ScheduleMode { coarse, fine };

/// Target ranges visited by progressive training, ending at max_range.
/// coarse: {0, K/2, K}; fine: {0, 1, 2, ..., K}. K = 0 gives {0}.
std::vector<double> curriculum_schedule(double max_range, ScheduleMode mode);

struct TrainingBudget {
  long long max_env_steps = 2'000'000;  ///< per hrm_train call, rollout steps only
  int max_iterations = 1'000'000;
};

struct TrainingCurveRow {
  int iteration = 0;  ///< global across stages
  double k = 0.0;
  long long env_steps = 0;  ///< cumulative rollout steps
  double eval_reward = 0.0;
  PpoLossTerms losses;
};

struct HrmResult {
  PolicyParams params;
  bool converged = false;
  double final_eval_reward = 0.0;
  double best_eval_reward = 0.0;
  long long env_steps = 0;
  int iterations = 0;
  /// Rollout steps consumed when the threshold was first exceeded.
  std::optional<long long> steps_to_threshold;
};

struct StageResult {
  double k = 0.0;
  HrmResult result;
};

struct ProgressiveResult {
  PolicyParams params;
  bool converged = false;
  std::vector<StageResult> stages;
};

/// Owns the rollout environments, optimizer state and training curve. One
/// trainer is the single writer of the parameters it updates; evaluation runs
/// on copies.
class HoverTrainer {
 public:
  HoverTrainer(VehicleParams vehicle, RewardWeights weights, EpisodeConfig episode, PpoConfig ppo);

  /// Rollout/update loop until the deterministic evaluation reward exceeds
  /// `threshold` (default: ppo.r_max) or the budget runs out. On budget
  /// exhaustion returns the best parameters seen with converged = false.
  HrmResult hrm_train(double k, const PolicyParams& init, const TrainingBudget& budget,
                      std::optional<double> threshold = std::nullopt);

  /// Mean cumulative reward over ppo.eval_episodes mean-mode episodes with
  /// fixed seeds, target range k.
  double evaluate(const PolicyParams& params, double k);

  /// Collects ppo.rollout_steps transitions with the current policy and folds
  /// the observations into params.normalizer afterwards.
  RolloutBatch collect_rollout(PolicyParams& params);

  void set_range(double k);
  const std::vector<TrainingCurveRow>& curve() const { return curve_; }
  long long total_env_steps() const { return total_steps_; }
  const PpoConfig& ppo() const { return ppo_; }
  const EpisodeConfig& episode() const { return episode_; }
  const VehicleParams& vehicle() const { return vehicle_; }
  const RewardWeights& weights() const { return weights_; }

  void on_iteration(std::function<void(const TrainingCurveRow&)> callback) { callback_ = std::move(callback); }

 private:
  void record(const TrainingCurveRow& row);

  VehicleParams vehicle_;
  RewardWeights weights_;
  EpisodeConfig episode_;
  PpoConfig ppo_;
  std::vector<HoverEnv> envs_;
  std::vector<Observation> current_obs_;
  PpoOptimizerState optimizer_;
  std::mt19937_64 rng_;
  BatchPolicyEvaluator evaluator_;
  std::vector<TrainingCurveRow> curve_;
  long long total_steps_ = 0;
  int iteration_ = 0;
  std::function<void(const TrainingCurveRow&)> callback_;
};

/// Runs hrm_train over curriculum_schedule(K, mode), promoting to the next
/// range once the evaluation reward exceeds ppo.promotion_reward. Unconverged
/// stages are reported but later stages still run from the best parameters.
ProgressiveResult progressive_train(double max_range, const PolicyParams& init, HoverTrainer& trainer,
                                    ScheduleMode mode, const TrainingBudget& per_stage);

/// Deterministic seed derivation (splitmix64).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

}  // namespace tiltrotor
