#include "advrl/envs/tabular.hpp"

namespace advrl::envs {

TabularEnv::TabularEnv(MdpSpec spec, std::string id, nlohmann::json params, int horizon)
    : Environment(horizon), spec_(std::move(spec)), id_(std::move(id)), params_(std::move(params)) {
  spec_.validate();
}

std::unique_ptr<Environment> TabularEnv::clone() const {
  return std::make_unique<TabularEnv>(*this);
}

std::size_t TabularEnv::sample(std::span<const double> probs) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double x = u(rng());
  double acc = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] <= 0.0) continue;
    acc += probs[i];
    last_positive = i;
    if (x < acc) return i;
  }
  return last_positive;
}

Observation TabularEnv::do_reset() {
  state_ = sample(spec_.start);
  return spec_.observation[state_];
}

StepResult TabularEnv::do_step(std::size_t action) {
  const std::size_t n = spec_.state_count;
  const std::span<const double> row(spec_.transition.data() + (state_ * spec_.action_count + action) * n, n);
  const double reward = spec_.r(state_, action);
  state_ = sample(row);
  StepResult r;
  r.observation = spec_.observation[state_];
  r.reward = reward;
  r.terminated = spec_.terminal[state_];
  return r;
}

}  // namespace advrl::envs
