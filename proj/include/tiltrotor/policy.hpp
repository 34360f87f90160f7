#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "tiltrotor/hover_env.hpp"
#include "tiltrotor/mlp.hpp"

namespace tiltrotor {

inline constexpr std::size_t kHiddenWidth = 64;
inline constexpr double kLogStdMin = -5.0;
inline constexpr double kLogStdMax = 2.0;
inline constexpr double kInitialLogStd = -0.5;

/// Running mean/variance of observations; the network sees
/// clip((o - mean) / sqrt(var + 1e-8), -clip, clip).
struct ObservationNormalizer {
  Observation mean{};
  Observation var{};
  double count = 0.0;
  double clip = 10.0;
  bool enabled = true;

  ObservationNormalizer() { var.fill(1.0); }

  /// Merges a block of raw observations (row-major, kObservationSize wide).
  void update(std::span<const double> observations);
  void apply(const Observation& raw, std::span<double> out) const;
};

/// Policy network (17 -> 64 -> 64 -> 5 means + 5 log-stddevs, tanh hidden) and
/// value network (17 -> 64 -> 64 -> 1).
struct PolicyParams {
  Mlp policy{{kObservationSize, kHiddenWidth, kHiddenWidth, 2 * kActionSize}};
  Mlp value{{kObservationSize, kHiddenWidth, kHiddenWidth, 1}};
  ObservationNormalizer normalizer;

  static PolicyParams random(std::uint64_t seed);
  /// Same, with the output bias set so the initial mean action is `initial_action`
  /// (typically the normalized trim command).
  static PolicyParams random(std::uint64_t seed, const ActionVector& initial_action);
  static PolicyParams zeros();

  bool finite() const { return policy.finite() && value.finite(); }
};

enum class ActionMode { sample, mean };

struct PolicySample {
  ActionVector action{};  ///< tanh(raw), in [-1, 1]
  ActionVector raw{};     ///< pre-squash Gaussian sample
  ActionVector mean{};
  ActionVector log_std{};
  /// Gaussian log-density of `raw`. The tanh Jacobian does not depend on the
  /// parameters, so it cancels in PPO probability ratios and is not included.
  double log_prob = 0.0;
  double value = 0.0;
};

/// log N(raw; mean, exp(log_std)^2), summed over dimensions.
double gaussian_log_density(std::span<const double> raw, std::span<const double> mean,
                            std::span<const double> log_std);

/// Splits a policy-network output row into mean and clamped log-stddev.
void split_policy_output(std::span<const double> row, std::span<double> mean, std::span<double> log_std);

/// Throws CorruptModelError on non-finite weights.
PolicySample policy_eval(const Observation& obs, const PolicyParams& params, ActionMode mode,
                         std::mt19937_64& rng);

/// Batched evaluation for lock-stepped environments; reuses its workspaces.
class BatchPolicyEvaluator {
 public:
  /// `features` receives the normalized network inputs (row-major).
  void evaluate(std::span<const Observation> observations, const PolicyParams& params,
                ActionMode mode, std::mt19937_64& rng, std::vector<PolicySample>& out,
                std::vector<double>* features = nullptr, bool with_value = true);
  std::vector<double> values(std::span<const Observation> observations, const PolicyParams& params);

 private:
  std::vector<double> input_;
  Mlp::Workspace policy_ws_;
  Mlp::Workspace value_ws_;
};

}  // namespace tiltrotor
