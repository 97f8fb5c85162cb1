#pragma once

#include <span>

#include "advrl/envs/environment.hpp"

namespace advrl::envs {

/// Environment that samples directly from an MdpSpec.
class TabularEnv : public Environment {
 public:
  TabularEnv(MdpSpec spec, std::string id, nlohmann::json params, int horizon);

  std::string id() const override { return id_; }
  std::size_t observation_dim() const override { return spec_.observation_dim(); }
  std::size_t action_count() const override { return spec_.action_count; }
  nlohmann::json params() const override { return params_; }
  std::unique_ptr<Environment> clone() const override;
  std::optional<MdpSpec> enumerate() const override { return spec_; }

  const MdpSpec& spec() const { return spec_; }
  std::size_t state() const { return state_; }

 protected:
  Observation do_reset() override;
  StepResult do_step(std::size_t action) override;
  nlohmann::json save_dynamics() const override { return {{"state", state_}}; }
  void load_dynamics(const nlohmann::json& s) override { state_ = s.at("state").get<std::size_t>(); }

 private:
  std::size_t sample(std::span<const double> probs);

  MdpSpec spec_;
  std::string id_;
  nlohmann::json params_;
  std::size_t state_ = 0;
};

}  // namespace advrl::envs
