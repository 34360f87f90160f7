#include "tiltrotor/policy.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "tiltrotor/errors.hpp"

namespace tiltrotor {

void ObservationNormalizer::update(std::span<const double> observations) {
  const std::size_t n = observations.size() / kObservationSize;
  if (n == 0) return;
  Observation batch_mean{};
  Observation batch_var{};
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t i = 0; i < kObservationSize; ++i) batch_mean[i] += observations[r * kObservationSize + i];
  for (double& m : batch_mean) m /= static_cast<double>(n);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t i = 0; i < kObservationSize; ++i) {
      const double d = observations[r * kObservationSize + i] - batch_mean[i];
      batch_var[i] += d * d;
    }
  for (double& v : batch_var) v /= static_cast<double>(n);

  // Parallel-variance merge of (count, mean, var) with the batch moments.
  const double nb = static_cast<double>(n);
  const double total = count + nb;
  for (std::size_t i = 0; i < kObservationSize; ++i) {
    const double delta = batch_mean[i] - mean[i];
    const double m2 = var[i] * count + batch_var[i] * nb + delta * delta * count * nb / total;
    mean[i] += delta * nb / total;
    var[i] = m2 / total;
  }
  count = total;
}

void ObservationNormalizer::apply(const Observation& raw, std::span<double> out) const {
  for (std::size_t i = 0; i < kObservationSize; ++i) {
    out[i] = enabled ? std::clamp((raw[i] - mean[i]) / std::sqrt(var[i] + 1e-8), -clip, clip) : raw[i];
  }
}

PolicyParams PolicyParams::random(std::uint64_t seed) { return random(seed, ActionVector{}); }

PolicyParams PolicyParams::random(std::uint64_t seed, const ActionVector& initial_action) {
  PolicyParams p;
  std::mt19937_64 rng(seed);
  p.policy.initialize(rng, 0.01);
  p.value.initialize(rng, 1.0);
  auto out_bias = p.policy.bias(2);
  for (std::size_t j = 0; j < kActionSize; ++j) {
    const double a = std::clamp(initial_action[j], -0.999, 0.999);
    out_bias[j] = std::atanh(a);
    out_bias[kActionSize + j] = kInitialLogStd;
  }
  return p;
}

PolicyParams PolicyParams::zeros() { return PolicyParams{}; }

double gaussian_log_density(std::span<const double> raw, std::span<const double> mean,
                            std::span<const double> log_std) {
  constexpr double half_log_2pi = 0.91893853320467274178;
  double lp = 0.0;
  for (std::size_t j = 0; j < raw.size(); ++j) {
    const double z = (raw[j] - mean[j]) * std::exp(-log_std[j]);
    lp += -0.5 * z * z - log_std[j] - half_log_2pi;
  }
  return lp;
}

void split_policy_output(std::span<const double> row, std::span<double> mean, std::span<double> log_std) {
  for (std::size_t j = 0; j < kActionSize; ++j) {
    mean[j] = row[j];
    log_std[j] = std::clamp(row[kActionSize + j], kLogStdMin, kLogStdMax);
  }
}

void BatchPolicyEvaluator::evaluate(std::span<const Observation> observations, const PolicyParams& params,
                                    ActionMode mode, std::mt19937_64& rng, std::vector<PolicySample>& out,
                                    std::vector<double>* features, bool with_value) {
  if (!params.finite()) throw CorruptModelError("policy parameters contain non-finite values");
  const std::size_t n = observations.size();
  input_.resize(n * kObservationSize);
  for (std::size_t r = 0; r < n; ++r) {
    params.normalizer.apply(observations[r], std::span<double>(input_).subspan(r * kObservationSize, kObservationSize));
  }
  if (features) *features = input_;

  params.policy.forward(input_, n, policy_ws_);
  if (with_value) params.value.forward(input_, n, value_ws_);

  std::normal_distribution<double> normal(0.0, 1.0);
  out.resize(n);
  const auto pout = policy_ws_.output();
  for (std::size_t r = 0; r < n; ++r) {
    PolicySample& s = out[r];
    split_policy_output(pout.subspan(r * 2 * kActionSize, 2 * kActionSize), s.mean, s.log_std);
    for (std::size_t j = 0; j < kActionSize; ++j) {
      s.raw[j] = mode == ActionMode::mean ? s.mean[j] : s.mean[j] + std::exp(s.log_std[j]) * normal(rng);
      s.action[j] = std::tanh(s.raw[j]);
    }
    s.log_prob = gaussian_log_density(s.raw, s.mean, s.log_std);
    s.value = with_value ? value_ws_.output()[r] : 0.0;
  }
}

std::vector<double> BatchPolicyEvaluator::values(std::span<const Observation> observations,
                                                 const PolicyParams& params) {
  const std::size_t n = observations.size();
  input_.resize(n * kObservationSize);
  for (std::size_t r = 0; r < n; ++r) {
    params.normalizer.apply(observations[r], std::span<double>(input_).subspan(r * kObservationSize, kObservationSize));
  }
  params.value.forward(input_, n, value_ws_);
  const auto v = value_ws_.output();
  return {v.begin(), v.end()};
}

PolicySample policy_eval(const Observation& obs, const PolicyParams& params, ActionMode mode,
                         std::mt19937_64& rng) {
  BatchPolicyEvaluator evaluator;
  std::vector<PolicySample> out;
  evaluator.evaluate(std::span<const Observation>(&obs, 1), params, mode, rng, out);
  return out.front();
}

}  // namespace tiltrotor
