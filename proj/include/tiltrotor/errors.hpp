#pragma once

#include <stdexcept>
#include <string>

namespace tiltrotor {

/// Input outside the documented domain of an operation (e.g. actuator limits).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Euler kinematics evaluated too close to |theta| = pi/2.
class SingularityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Integration produced a non-finite state.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Trim inputs exceed the rotor speed limit.
class InfeasibleTrimError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or missing configuration. Carries file and key context in what().
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite network weights.
class CorruptModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace tiltrotor
