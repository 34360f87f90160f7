#include "tiltrotor/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "tiltrotor/config.hpp"
#include "tiltrotor/errors.hpp"

namespace tiltrotor {

PpoConfig PpoConfig::from_config(const KeyValueConfig& cfg) {
  PpoConfig c;
  c.gamma = cfg.get_double("gamma", c.gamma);
  c.lambda = cfg.get_double("lambda", c.lambda);
  c.clip = cfg.get_double("clip", c.clip);
  c.learning_rate = cfg.get_double("learning_rate", c.learning_rate);
  c.epochs = static_cast<int>(cfg.get_int("epochs", c.epochs));
  c.minibatch = static_cast<std::size_t>(cfg.get_int("minibatch", static_cast<long long>(c.minibatch)));
  c.rollout_steps = static_cast<std::size_t>(cfg.get_int("rollout_steps", static_cast<long long>(c.rollout_steps)));
  c.num_envs = static_cast<std::size_t>(cfg.get_int("num_envs", static_cast<long long>(c.num_envs)));
  c.entropy_coef = cfg.get_double("entropy_coef", c.entropy_coef);
  c.value_coef = cfg.get_double("value_coef", c.value_coef);
  c.max_grad_norm = cfg.get_double("max_grad_norm", c.max_grad_norm);
  c.r_max = cfg.get_double("r_max", c.r_max);
  c.promotion_reward = cfg.get_double("promotion_reward", c.promotion_reward);
  c.eval_episodes = static_cast<int>(cfg.get_int("eval_episodes", c.eval_episodes));
  c.seed = static_cast<std::uint64_t>(cfg.get_int("seed", static_cast<long long>(c.seed)));
  try {
    c.validate();
  } catch (const DomainError& e) {
    throw ConfigError(cfg.source() + ": " + e.what());
  }
  return c;
}

void PpoConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw DomainError(std::string("invalid PPO config: ") + what);
  };
  require(gamma > 0.0 && gamma <= 1.0, "gamma must lie in (0, 1]");
  require(lambda > 0.0 && lambda <= 1.0, "lambda must lie in (0, 1]");
  require(clip > 0.0 && clip < 1.0, "clip must lie in (0, 1)");
  require(learning_rate > 0.0, "learning_rate must be > 0");
  require(epochs > 0, "epochs must be > 0");
  require(minibatch > 0, "minibatch must be > 0");
  require(num_envs > 0 && rollout_steps >= num_envs, "rollout_steps must cover every env");
  require(entropy_coef >= 0.0 && value_coef >= 0.0, "loss coefficients must be >= 0");
  require(max_grad_norm > 0.0, "max_grad_norm must be > 0");
  require(eval_episodes > 0, "eval_episodes must be > 0");
}

void RolloutBatch::check() const {
  const std::size_t n = size();
  if (features.size() != n * kObservationSize || raw_actions.size() != n * kActionSize ||
      log_probs.size() != n || values.size() != n || dones.size() != n) {
    throw std::logic_error("RolloutBatch: misaligned field lengths");
  }
  if (segment_ends.size() != bootstrap_values.size()) {
    throw std::logic_error("RolloutBatch: one bootstrap value per segment required");
  }
  if (!segment_ends.empty() && segment_ends.back() != n) {
    throw std::logic_error("RolloutBatch: segments must cover the batch");
  }
}

RolloutBatch compute_gae(RolloutBatch batch, const PpoConfig& config) {
  const std::size_t n = batch.size();
  if (batch.values.size() != n || batch.dones.size() != n) {
    throw std::logic_error("compute_gae: values and dones must align with rewards");
  }
  if (batch.segment_ends.empty() && n > 0) {
    batch.segment_ends = {n};
    batch.bootstrap_values = {0.0};
  }
  batch.advantages.assign(n, 0.0);
  batch.returns.assign(n, 0.0);

  std::size_t start = 0;
  for (std::size_t s = 0; s < batch.segment_ends.size(); ++s) {
    const std::size_t end = batch.segment_ends[s];
    double gae = 0.0;
    for (std::size_t t = end; t-- > start;) {
      const double next_value = (t + 1 == end) ? batch.bootstrap_values[s] : batch.values[t + 1];
      const double nonterminal = batch.dones[t] ? 0.0 : 1.0;
      const double delta = batch.rewards[t] + config.gamma * next_value * nonterminal - batch.values[t];
      gae = delta + config.gamma * config.lambda * nonterminal * gae;
      batch.advantages[t] = gae;
    }
    start = end;
  }
  for (std::size_t t = 0; t < n; ++t) batch.returns[t] = batch.advantages[t] + batch.values[t];
  return batch;
}

void normalize_advantages(RolloutBatch& batch) {
  auto& a = batch.advantages;
  if (a.empty()) return;
  const double n = static_cast<double>(a.size());
  const double mean = std::accumulate(a.begin(), a.end(), 0.0) / n;
  double var = 0.0;
  for (const double x : a) var += (x - mean) * (x - mean);
  var /= n;
  const double inv_std = 1.0 / std::sqrt(var + 1e-12);
  for (double& x : a) x = (x - mean) * inv_std;
}

PpoLossTerms ppo_loss(const PolicyParams& params, const RolloutBatch& batch,
                      std::span<const std::size_t> indices, const PpoConfig& config,
                      std::span<double> grad_policy, std::span<double> grad_value, PpoLossWorkspace& ws) {
  constexpr double half_log_2pi = 0.91893853320467274178;
  const std::size_t m = indices.size();
  PpoLossTerms terms;
  if (m == 0) return terms;
  const bool want_grad = !grad_policy.empty();

  ws.input.resize(m * kObservationSize);
  for (std::size_t i = 0; i < m; ++i) {
    std::copy_n(batch.features.begin() + static_cast<std::ptrdiff_t>(indices[i] * kObservationSize),
                kObservationSize, ws.input.begin() + static_cast<std::ptrdiff_t>(i * kObservationSize));
  }
  params.policy.forward(ws.input, m, ws.policy_ws);
  params.value.forward(ws.input, m, ws.value_ws);
  const auto pout = ws.policy_ws.output();
  const auto vout = ws.value_ws.output();

  ws.d_policy_out.assign(m * 2 * kActionSize, 0.0);
  ws.d_value_out.assign(m, 0.0);
  const double inv_m = 1.0 / static_cast<double>(m);

  std::array<double, kActionSize> mean{}, log_std{}, raw{};
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t t = indices[i];
    const auto row = pout.subspan(i * 2 * kActionSize, 2 * kActionSize);
    split_policy_output(row, mean, log_std);
    std::copy_n(batch.raw_actions.begin() + static_cast<std::ptrdiff_t>(t * kActionSize), kActionSize, raw.begin());

    const double log_prob = gaussian_log_density(raw, mean, log_std);
    const double log_ratio = log_prob - batch.log_probs[t];
    const double ratio = std::exp(log_ratio);
    const double adv = batch.advantages[t];
    const double unclipped = ratio * adv;
    const double clipped = std::clamp(ratio, 1.0 - config.clip, 1.0 + config.clip) * adv;
    const bool unclipped_active = unclipped <= clipped;

    terms.policy_loss -= std::min(unclipped, clipped) * inv_m;
    terms.approx_kl += ((ratio - 1.0) - log_ratio) * inv_m;
    if (std::abs(ratio - 1.0) > config.clip) terms.clip_fraction += inv_m;
    for (std::size_t j = 0; j < kActionSize; ++j) terms.entropy += (0.5 + half_log_2pi + log_std[j]) * inv_m;

    const double v_err = vout[i] - batch.returns[t];
    terms.value_loss += v_err * v_err * inv_m;

    if (!want_grad) continue;
    double* d_row = ws.d_policy_out.data() + i * 2 * kActionSize;
    const double coef = unclipped_active ? -adv * ratio * inv_m : 0.0;
    for (std::size_t j = 0; j < kActionSize; ++j) {
      const double inv_var = std::exp(-2.0 * log_std[j]);
      const double diff = raw[j] - mean[j];
      d_row[j] = coef * diff * inv_var;
      const double raw_ls = row[kActionSize + j];
      const bool ls_free = raw_ls >= kLogStdMin && raw_ls <= kLogStdMax;
      d_row[kActionSize + j] = ls_free ? coef * (diff * diff * inv_var - 1.0) - config.entropy_coef * inv_m : 0.0;
    }
    ws.d_value_out[i] = config.value_coef * 2.0 * v_err * inv_m;
  }
  terms.total = terms.policy_loss + config.value_coef * terms.value_loss - config.entropy_coef * terms.entropy;

  if (want_grad) {
    params.policy.backward(ws.policy_ws, ws.d_policy_out, grad_policy);
    params.value.backward(ws.value_ws, ws.d_value_out, grad_value);
  }
  return terms;
}

void AdamState::step(std::span<double> params, std::span<const double> grad, double learning_rate) {
  if (m.size() != params.size()) {
    m.assign(params.size(), 0.0);
    v.assign(params.size(), 0.0);
    t = 0;
  }
  ++t;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
  const double step_size = learning_rate / bc1;
  for (std::size_t i = 0; i < params.size(); ++i) {
    m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
    v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
    params[i] -= step_size * m[i] / (std::sqrt(v[i] / bc2) + eps);
  }
}

PpoUpdateStats ppo_update(PolicyParams& params, const RolloutBatch& batch, const PpoConfig& config,
                          PpoOptimizerState& optimizer, std::mt19937_64& rng) {
  batch.check();
  if (batch.advantages.size() != batch.size() || batch.returns.size() != batch.size()) {
    throw std::logic_error("ppo_update: compute advantages first");
  }
  PpoUpdateStats stats;
  const PolicyParams entry = params;
  const PpoOptimizerState entry_optimizer = optimizer;

  std::vector<std::size_t> order(batch.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> grad_p(params.policy.parameter_count());
  std::vector<double> grad_v(params.value.parameter_count());
  PpoLossWorkspace ws;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    PpoLossTerms epoch_terms;
    int epoch_batches = 0;
    for (std::size_t start = 0; start < order.size(); start += config.minibatch) {
      const std::size_t count = std::min(config.minibatch, order.size() - start);
      std::fill(grad_p.begin(), grad_p.end(), 0.0);
      std::fill(grad_v.begin(), grad_v.end(), 0.0);
      const PpoLossTerms terms = ppo_loss(params, batch, std::span(order).subspan(start, count), config,
                                          grad_p, grad_v, ws);
      double norm_sq = 0.0;
      for (const double g : grad_p) norm_sq += g * g;
      for (const double g : grad_v) norm_sq += g * g;
      if (!std::isfinite(terms.total) || !std::isfinite(norm_sq)) {
        params = entry;
        optimizer = entry_optimizer;
        stats.aborted = true;
        stats.diagnostic = "non-finite loss in epoch " + std::to_string(epoch) + "; update discarded";
        return stats;
      }
      const double norm = std::sqrt(norm_sq);
      if (norm > config.max_grad_norm) {
        const double scale = config.max_grad_norm / norm;
        for (double& g : grad_p) g *= scale;
        for (double& g : grad_v) g *= scale;
      }
      optimizer.policy.step(params.policy.parameters(), grad_p, config.learning_rate);
      optimizer.value.step(params.value.parameters(), grad_v, config.learning_rate);

      epoch_terms.policy_loss += terms.policy_loss;
      epoch_terms.value_loss += terms.value_loss;
      epoch_terms.entropy += terms.entropy;
      epoch_terms.approx_kl += terms.approx_kl;
      epoch_terms.clip_fraction += terms.clip_fraction;
      epoch_terms.total += terms.total;
      ++epoch_batches;
      ++stats.minibatches;
    }
    if (epoch + 1 == config.epochs && epoch_batches > 0) {
      const double k = 1.0 / epoch_batches;
      stats.last = {epoch_terms.policy_loss * k, epoch_terms.value_loss * k, epoch_terms.entropy * k,
                    epoch_terms.approx_kl * k,   epoch_terms.clip_fraction * k, epoch_terms.total * k};
    }
  }
  if (!params.finite()) {
    params = entry;
    optimizer = entry_optimizer;
    stats.aborted = true;
    stats.diagnostic = "update produced non-finite weights; discarded";
  }
  return stats;
}

}  // namespace tiltrotor
