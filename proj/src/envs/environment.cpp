#include "advrl/envs/environment.hpp"

#include <sstream>

#include "advrl/errors.hpp"

namespace advrl::envs {

Observation Environment::reset(std::uint64_t seed) {
  rng_.seed(seed);
  elapsed_ = 0;
  done_ = false;
  started_ = true;
  return do_reset();
}

StepResult Environment::step(std::size_t action) {
  if (!started_) throw UsageError(id() + ": step() before reset()");
  if (done_) throw UsageError(id() + ": step() after the episode ended; call reset()");
  if (action >= action_count()) {
    throw UsageError(id() + ": action " + std::to_string(action) + " out of range [0, " +
                     std::to_string(action_count()) + ")");
  }
  StepResult r = do_step(action);
  ++elapsed_;
  if (!r.terminated && elapsed_ >= horizon_) r.truncated = true;
  done_ = r.done();
  return r;
}

nlohmann::json Environment::save_state() const {
  std::ostringstream rng_text;
  rng_text << rng_;
  return {{"elapsed", elapsed_},
          {"done", done_},
          {"started", started_},
          {"rng", rng_text.str()},
          {"dynamics", save_dynamics()}};
}

void Environment::load_state(const nlohmann::json& state) {
  try {
    elapsed_ = state.at("elapsed").get<int>();
    done_ = state.at("done").get<bool>();
    started_ = state.at("started").get<bool>();
    std::istringstream rng_text(state.at("rng").get<std::string>());
    rng_text >> rng_;
    load_dynamics(state.at("dynamics"));
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(id() + ": malformed environment state: " + e.what());
  }
}

}  // namespace advrl::envs
