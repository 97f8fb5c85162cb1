#include "advrl/envs/mdp_spec.hpp"

#include <cmath>
#include <string>

#include "advrl/errors.hpp"

namespace advrl::envs {

MdpSpec MdpSpec::empty(std::size_t states, std::size_t actions, double gamma) {
  MdpSpec m;
  m.state_count = states;
  m.action_count = actions;
  m.transition.assign(states * actions * states, 0.0);
  m.reward.assign(states * actions, 0.0);
  m.gamma = gamma;
  m.observation.assign(states, {});
  m.terminal.assign(states, false);
  m.start.assign(states, 0.0);
  if (states > 0) m.start[0] = 1.0;
  return m;
}

void MdpSpec::validate() const {
  if (state_count == 0 || action_count == 0) throw UsageError("MDP needs states and actions");
  if (transition.size() != state_count * action_count * state_count ||
      reward.size() != state_count * action_count || observation.size() != state_count ||
      terminal.size() != state_count || start.size() != state_count) {
    throw UsageError("MDP tables have inconsistent sizes");
  }
  if (!(gamma > 0.0 && gamma < 1.0)) {
    throw UsageError("MDP discount must lie in (0, 1), got " + std::to_string(gamma));
  }
  for (std::size_t s = 0; s < state_count; ++s) {
    for (std::size_t a = 0; a < action_count; ++a) {
      double total = 0.0;
      for (std::size_t n = 0; n < state_count; ++n) {
        const double v = p(s, a, n);
        if (!(v >= 0.0)) throw UsageError("negative transition probability");
        total += v;
      }
      if (std::abs(total - 1.0) > 1e-12) {
        throw UsageError("transition row (" + std::to_string(s) + "," + std::to_string(a) +
                         ") sums to " + std::to_string(total));
      }
      if (terminal[s] && (p(s, a, s) != 1.0 || r(s, a) != 0.0)) {
        throw UsageError("terminal state " + std::to_string(s) + " is not absorbing");
      }
    }
  }
  double start_total = 0.0;
  for (double v : start) start_total += v;
  if (std::abs(start_total - 1.0) > 1e-12) throw UsageError("start distribution does not sum to 1");
  const std::size_t d = observation_dim();
  for (std::size_t s = 0; s < state_count; ++s) {
    if (observation[s].size() != d) throw UsageError("observation dimension varies by state");
    for (std::size_t t = 0; t < s; ++t) {
      if (observation[s] == observation[t]) {
        throw UsageError("states " + std::to_string(t) + " and " + std::to_string(s) +
                         " share an observation");
      }
    }
  }
}

std::size_t MdpSpec::find_state(const std::vector<double>& obs) const {
  for (std::size_t s = 0; s < state_count; ++s) {
    if (observation[s] == obs) return s;
  }
  return state_count;
}

}  // namespace advrl::envs
