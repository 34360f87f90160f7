#pragma once

#include <cstddef>
#include <vector>

#include "tiltrotor/hover_env.hpp"

namespace tiltrotor {

struct EpisodeRow {
  double time = 0.0;  ///< s, end of the step
  Vec3 position = Vec3::Zero();
  Vec3 attitude = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
  Vec3 rates = Vec3::Zero();
  ActuatorCommand command;
  double reward = 0.0;
  FlightMode mode = FlightMode::hover;
  std::size_t target_index = 0;  ///< active hover point while this step ran
  Vec3 target = Vec3::Zero();
};

/// Per-step record of one closed-loop run. Rows are uniformly spaced by dt.
struct EpisodeLog {
  double dt = 0.01;
  std::vector<EpisodeRow> rows;
  TerminationStatus status = TerminationStatus::running;
  bool completed = false;      ///< every hover point was reached
  std::size_t points_reached = 0;

  bool empty() const { return rows.empty(); }
  std::size_t size() const { return rows.size(); }
  bool crashed() const {
    return status == TerminationStatus::crash_attitude || status == TerminationStatus::out_of_bounds ||
           status == TerminationStatus::diverged;
  }
  double duration() const { return rows.empty() ? 0.0 : rows.back().time; }
};

}  // namespace tiltrotor
