#pragma once

#include <cstddef>
#include <vector>

namespace advrl::envs {

/// Fully enumerated finite MDP with a fixed observation embedding.
struct MdpSpec {
  std::size_t state_count = 0;
  std::size_t action_count = 0;
  /// P(s' | s, a) stored at [(s * action_count + a) * state_count + s'].
  std::vector<double> transition;
  /// Expected immediate reward r(s, a) stored at [s * action_count + a].
  std::vector<double> reward;
  double gamma = 0.9;
  /// observation[s] is the vector the agent sees in state s.
  std::vector<std::vector<double>> observation;
  /// Terminal states must be absorbing with zero reward.
  std::vector<bool> terminal;
  /// Initial-state distribution.
  std::vector<double> start;

  double p(std::size_t s, std::size_t a, std::size_t next) const {
    return transition[(s * action_count + a) * state_count + next];
  }
  double& p(std::size_t s, std::size_t a, std::size_t next) {
    return transition[(s * action_count + a) * state_count + next];
  }
  double r(std::size_t s, std::size_t a) const { return reward[s * action_count + a]; }
  double& r(std::size_t s, std::size_t a) { return reward[s * action_count + a]; }

  std::size_t observation_dim() const { return observation.empty() ? 0 : observation.front().size(); }

  /// Allocates zeroed tables for the given sizes.
  static MdpSpec empty(std::size_t states, std::size_t actions, double gamma);

  /// Throws UsageError describing the first violated invariant: rows off the
  /// simplex (1e-12), duplicate embeddings, non-absorbing terminals, bad gamma.
  void validate() const;

  /// Index of the state whose embedding equals `obs` exactly, or state_count.
  std::size_t find_state(const std::vector<double>& obs) const;
};

}  // namespace advrl::envs
