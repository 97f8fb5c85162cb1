#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "advrl/envs/mdp_spec.hpp"

namespace advrl::envs {

using Observation = std::vector<double>;

struct StepResult {
  Observation observation;
  double reward = 0.0;
  /// True episode end (absorbing state reached).
  bool terminated = false;
  /// Horizon cap hit; the state itself is not terminal.
  bool truncated = false;

  bool done() const { return terminated || truncated; }
};

/// Episodic environment with continuous observation vectors and a discrete
/// action set. Instances are single-owner; use clone() per worker.
class Environment {
 public:
  virtual ~Environment() = default;

  virtual std::string id() const = 0;
  virtual std::size_t observation_dim() const = 0;
  virtual std::size_t action_count() const = 0;
  /// Parameter block this instance was built from (defaults materialized).
  virtual nlohmann::json params() const = 0;
  virtual std::unique_ptr<Environment> clone() const = 0;
  /// Exact finite description, or nullopt for continuous-state environments.
  virtual std::optional<MdpSpec> enumerate() const = 0;

  int horizon() const { return horizon_; }
  int elapsed() const { return elapsed_; }
  bool done() const { return done_; }

  /// Starts a new episode. The same seed always gives the same observation
  /// and, together with the same actions, the same trajectory.
  Observation reset(std::uint64_t seed);

  /// Throws UsageError on an out-of-range action or when the episode is over.
  StepResult step(std::size_t action);

  /// Complete dynamic state (including the internal RNG) for checkpoints.
  nlohmann::json save_state() const;
  void load_state(const nlohmann::json& state);

 protected:
  explicit Environment(int horizon) : horizon_(horizon) {}

  virtual Observation do_reset() = 0;
  /// Advances the dynamics; sets `terminated` when an absorbing state is hit.
  virtual StepResult do_step(std::size_t action) = 0;
  virtual nlohmann::json save_dynamics() const = 0;
  virtual void load_dynamics(const nlohmann::json& state) = 0;

  std::mt19937_64& rng() { return rng_; }

 private:
  int horizon_;
  int elapsed_ = 0;
  bool done_ = true;
  bool started_ = false;
  std::mt19937_64 rng_;
};

}  // namespace advrl::envs
