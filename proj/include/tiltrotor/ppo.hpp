#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "tiltrotor/policy.hpp"

namespace tiltrotor {

class KeyValueConfig;

struct PpoConfig {
  double gamma = 0.99;
  double lambda = 0.95;
  double clip = 0.2;
  double learning_rate = 3e-4;
  int epochs = 10;
  std::size_t minibatch = 256;
  std::size_t rollout_steps = 4096;  ///< total per iteration, split across envs
  std::size_t num_envs = 8;
  double entropy_coef = 0.0;
  double value_coef = 0.5;
  double max_grad_norm = 0.5;
  double r_max = 700.0;             ///< curriculum stop reward
  double promotion_reward = 700.0;  ///< per-k promotion threshold
  int eval_episodes = 5;
  std::uint64_t seed = 0;

  static PpoConfig from_config(const KeyValueConfig& cfg);
  void validate() const;
};

/// Flat rollout storage. Steps of one environment are contiguous and form a
/// segment; GAE runs per segment and bootstraps from `bootstrap_values` when
/// the segment's last step is not terminal.
struct RolloutBatch {
  std::vector<double> features;     ///< normalized network inputs, [n x kObservationSize]
  std::vector<double> raw_actions;  ///< [n x kActionSize]
  std::vector<double> log_probs;
  std::vector<double> rewards;
  std::vector<double> values;
  std::vector<unsigned char> dones;
  std::vector<std::size_t> segment_ends;  ///< exclusive end index of each segment
  std::vector<double> bootstrap_values;   ///< one per segment

  std::vector<double> advantages;
  std::vector<double> returns;

  std::size_t size() const { return rewards.size(); }
  /// Aligned-length check; throws std::logic_error on mismatch.
  void check() const;
};

/// Generalized advantage estimation; returns = advantages + values.
RolloutBatch compute_gae(RolloutBatch batch, const PpoConfig& config);

/// Zero mean, unit (population) variance over the whole batch.
void normalize_advantages(RolloutBatch& batch);

struct PpoLossTerms {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double approx_kl = 0.0;
  double clip_fraction = 0.0;
  double total = 0.0;
};

/// Reusable buffers for ppo_loss.
struct PpoLossWorkspace {
  std::vector<double> input;
  std::vector<double> d_policy_out;
  std::vector<double> d_value_out;
  Mlp::Workspace policy_ws;
  Mlp::Workspace value_ws;
};

/// Clipped-surrogate loss over `indices` plus value regression and entropy bonus:
///   total = -mean(min(r A, clip(r) A)) + value_coef mean((V - R)^2) - entropy_coef mean(H)
/// When the gradient spans are non-empty, d(total)/d(params) is accumulated into them.
PpoLossTerms ppo_loss(const PolicyParams& params, const RolloutBatch& batch,
                      std::span<const std::size_t> indices, const PpoConfig& config,
                      std::span<double> grad_policy, std::span<double> grad_value,
                      PpoLossWorkspace& ws);

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  long long t = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  void step(std::span<double> params, std::span<const double> grad, double learning_rate);
};

struct PpoOptimizerState {
  AdamState policy;
  AdamState value;
};

struct PpoUpdateStats {
  PpoLossTerms last;  ///< averaged over the final epoch's minibatches
  int minibatches = 0;
  bool aborted = false;
  std::string diagnostic;
};

/// Several epochs of shuffled minibatch Adam steps. On a non-finite loss the
/// update is abandoned and `params` restored to its value on entry.
PpoUpdateStats ppo_update(PolicyParams& params, const RolloutBatch& batch, const PpoConfig& config,
                          PpoOptimizerState& optimizer, std::mt19937_64& rng);

}  // namespace tiltrotor
