#include "tiltrotor/training.hpp"

#include <cmath>
#include <stdexcept>

namespace tiltrotor {

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::vector<double> curriculum_schedule(double max_range, ScheduleMode mode) {
  if (!(max_range >= 0.0) || !std::isfinite(max_range)) throw std::invalid_argument("max range must be >= 0");
  if (max_range == 0.0) return {0.0};
  if (mode == ScheduleMode::coarse) return {0.0, 0.5 * max_range, max_range};
  std::vector<double> ks;
  for (double k = 0.0; k < max_range; k += 1.0) ks.push_back(k);
  ks.push_back(max_range);
  return ks;
}

HoverTrainer::HoverTrainer(VehicleParams vehicle, RewardWeights weights, EpisodeConfig episode, PpoConfig ppo)
    : vehicle_(vehicle), weights_(weights), episode_(episode), ppo_(ppo), rng_(derive_seed(ppo.seed, 0)) {
  ppo_.validate();
  for (std::size_t i = 0; i < ppo_.num_envs; ++i) {
    EpisodeConfig cfg = episode_;
    cfg.seed = derive_seed(ppo_.seed, 100 + i);
    envs_.emplace_back(vehicle_, weights_, cfg);
    current_obs_.push_back(envs_.back().observation());
  }
}

void HoverTrainer::set_range(double k) {
  episode_.k = k;
  for (std::size_t i = 0; i < envs_.size(); ++i) {
    envs_[i].mutable_config().k = k;
    current_obs_[i] = envs_[i].reset();
  }
}

void HoverTrainer::record(const TrainingCurveRow& row) {
  curve_.push_back(row);
  if (callback_) callback_(row);
}

RolloutBatch HoverTrainer::collect_rollout(PolicyParams& params) {
  const std::size_t n_envs = envs_.size();
  const std::size_t per_env = ppo_.rollout_steps / n_envs;
  const std::size_t n = per_env * n_envs;

  RolloutBatch batch;
  batch.features.resize(n * kObservationSize);
  batch.raw_actions.resize(n * kActionSize);
  batch.log_probs.resize(n);
  batch.rewards.resize(n);
  batch.values.resize(n);
  batch.dones.resize(n);
  std::vector<double> raw_obs(n * kObservationSize);

  std::vector<PolicySample> samples;
  std::vector<double> features;
  for (std::size_t t = 0; t < per_env; ++t) {
    evaluator_.evaluate(current_obs_, params, ActionMode::sample, rng_, samples, &features);
    for (std::size_t e = 0; e < n_envs; ++e) {
      const std::size_t idx = e * per_env + t;  // env-major: each env is one segment
      std::copy_n(features.begin() + static_cast<std::ptrdiff_t>(e * kObservationSize), kObservationSize,
                  batch.features.begin() + static_cast<std::ptrdiff_t>(idx * kObservationSize));
      std::copy_n(current_obs_[e].begin(), kObservationSize,
                  raw_obs.begin() + static_cast<std::ptrdiff_t>(idx * kObservationSize));
      std::copy_n(samples[e].raw.begin(), kActionSize,
                  batch.raw_actions.begin() + static_cast<std::ptrdiff_t>(idx * kActionSize));
      batch.log_probs[idx] = samples[e].log_prob;
      batch.values[idx] = samples[e].value;

      const StepResult res = envs_[e].step(samples[e].action);
      double reward = res.reward;
      if (res.info.status == TerminationStatus::horizon) {
        // Time-limit truncation: bootstrap instead of treating as terminal.
        const std::vector<double> v = evaluator_.values(std::span(&res.observation, 1), params);
        reward += ppo_.gamma * v.front();
      }
      batch.rewards[idx] = reward;
      batch.dones[idx] = res.done ? 1 : 0;
      current_obs_[e] = res.done ? envs_[e].reset() : res.observation;
    }
  }
  const std::vector<double> tail_values = evaluator_.values(current_obs_, params);
  for (std::size_t e = 0; e < n_envs; ++e) {
    batch.segment_ends.push_back((e + 1) * per_env);
    batch.bootstrap_values.push_back(tail_values[e]);
  }
  params.normalizer.update(raw_obs);
  total_steps_ += static_cast<long long>(n);
  return batch;
}

double HoverTrainer::evaluate(const PolicyParams& params, double k) {
  const int n = ppo_.eval_episodes;
  std::vector<HoverEnv> envs;
  std::vector<Observation> obs;
  for (int i = 0; i < n; ++i) {
    EpisodeConfig cfg = episode_;
    cfg.k = k;
    cfg.seed = derive_seed(ppo_.seed ^ 0xE7A1ULL, static_cast<std::uint64_t>(i));
    envs.emplace_back(vehicle_, weights_, cfg);
    obs.push_back(envs.back().observation());
  }
  std::vector<double> returns(static_cast<std::size_t>(n), 0.0);
  std::vector<bool> done(static_cast<std::size_t>(n), false);
  std::mt19937_64 unused(0);
  std::vector<PolicySample> samples;
  BatchPolicyEvaluator evaluator;

  std::vector<std::size_t> live(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) live[static_cast<std::size_t>(i)] = static_cast<std::size_t>(i);
  std::vector<Observation> live_obs;
  while (!live.empty()) {
    live_obs.clear();
    for (const std::size_t i : live) live_obs.push_back(obs[i]);
    evaluator.evaluate(live_obs, params, ActionMode::mean, unused, samples, nullptr, false);
    std::vector<std::size_t> still;
    for (std::size_t j = 0; j < live.size(); ++j) {
      const std::size_t i = live[j];
      const StepResult res = envs[i].step(samples[j].action);
      returns[i] += res.reward;
      obs[i] = res.observation;
      if (!res.done) still.push_back(i);
    }
    live.swap(still);
  }
  double mean = 0.0;
  for (const double r : returns) mean += r;
  return mean / n;
}

HrmResult HoverTrainer::hrm_train(double k, const PolicyParams& init, const TrainingBudget& budget,
                                  std::optional<double> threshold) {
  const double target = threshold.value_or(ppo_.r_max);
  if (episode_.k != k || curve_.empty()) set_range(k);

  HrmResult result;
  PolicyParams params = init;
  double reward = evaluate(params, k);
  result.best_eval_reward = reward;
  result.params = params;
  record({iteration_, k, total_steps_, reward, {}});

  const long long start_steps = total_steps_;
  while (!(reward > target)) {
    const long long used = total_steps_ - start_steps;
    if (used >= budget.max_env_steps || result.iterations >= budget.max_iterations) {
      result.converged = false;
      result.final_eval_reward = reward;
      result.env_steps = used;
      return result;  // best-so-far parameters
    }
    RolloutBatch batch = compute_gae(collect_rollout(params), ppo_);
    normalize_advantages(batch);
    const PpoUpdateStats stats = ppo_update(params, batch, ppo_, optimizer_, rng_);
    ++iteration_;
    ++result.iterations;
    reward = evaluate(params, k);
    record({iteration_, k, total_steps_, reward, stats.last});
    if (reward > result.best_eval_reward) {
      result.best_eval_reward = reward;
      result.params = params;
    }
  }
  result.converged = true;
  result.params = params;
  result.final_eval_reward = reward;
  result.env_steps = total_steps_ - start_steps;
  if (result.iterations > 0) result.steps_to_threshold = result.env_steps;
  else result.steps_to_threshold = 0;
  return result;
}

ProgressiveResult progressive_train(double max_range, const PolicyParams& init, HoverTrainer& trainer,
                                    ScheduleMode mode, const TrainingBudget& per_stage) {
  ProgressiveResult out;
  out.converged = true;
  PolicyParams params = init;
  const std::vector<double> schedule = curriculum_schedule(max_range, mode);
  for (std::size_t s = 0; s < schedule.size(); ++s) {
    const bool last = s + 1 == schedule.size();
    const double threshold = last ? trainer.ppo().r_max : trainer.ppo().promotion_reward;
    HrmResult stage = trainer.hrm_train(schedule[s], params, per_stage, threshold);
    params = stage.params;
    out.converged = out.converged && stage.converged;
    out.stages.push_back({schedule[s], std::move(stage)});
  }
  out.params = params;
  return out;
}

}  // namespace tiltrotor
