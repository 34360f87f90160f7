#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>

#include "tiltrotor/policy.hpp"
#include "tiltrotor/training.hpp"

namespace tiltrotor {

inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  PolicyParams params;
  /// Free-form provenance: config hashes, seed, target range, etc.
  std::map<std::string, std::string> metadata;
};

/// JSON dump of both networks and the observation normalizer.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);

/// Throws IoError when the file cannot be read and CorruptModelError when it
/// is malformed, from another version, has mismatched shapes or non-finite
/// weights.
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// iteration, k, env_steps, eval_reward, then the PPO loss terms.
void write_training_curve(const std::filesystem::path& path, std::span<const TrainingCurveRow> rows);

}  // namespace tiltrotor
