#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace delayflow {

// Invalid user configuration (bad parameters, infeasible initial condition).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Base of every error raised while a model is being stepped.
class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class CollisionError : public ModelError {
 public:
  CollisionError(std::size_t agent, double t, double spacing)
      : ModelError("collision: agent " + std::to_string(agent) + " at t=" + std::to_string(t) +
                   " has spacing " + std::to_string(spacing)),
        agent_(agent),
        t_(t),
        spacing_(spacing) {}

  std::size_t agent() const noexcept { return agent_; }
  double time() const noexcept { return t_; }
  double spacing() const noexcept { return spacing_; }

 private:
  std::size_t agent_;
  double t_;
  double spacing_;
};

// Denominator of the exact-scheme effective density is not positive.
class CflViolation : public ModelError {
 public:
  CflViolation(std::size_t cell, double denominator)
      : ModelError("CFL violation at cell " + std::to_string(cell) +
                   ": effective-density denominator " + std::to_string(denominator) + " <= 0"),
        cell_(cell) {}

  std::size_t cell() const noexcept { return cell_; }

 private:
  std::size_t cell_;
};

class BoundsViolation : public ModelError {
 public:
  BoundsViolation(std::size_t cell, double t, double rho)
      : ModelError("density out of [0, 1/ell] at cell " + std::to_string(cell) +
                   ", t=" + std::to_string(t) + ": rho=" + std::to_string(rho)),
        cell_(cell),
        rho_(rho) {}

  std::size_t cell() const noexcept { return cell_; }
  double rho() const noexcept { return rho_; }

 private:
  std::size_t cell_;
  double rho_;
};

class HistoryError : public ModelError {
 public:
  using ModelError::ModelError;
};

}  // namespace delayflow
