#pragma once

#include <array>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "advrl/envs/environment.hpp"
#include "advrl/envs/tabular.hpp"

namespace advrl::envs {

/// `chain-mdp`: states 0..n-1 on a line, start at 0.
/// Actions: 0 left, 1 right, 2 stay, 3 jump back to state 0 (first `actions`
/// of these are available). An action has its intended effect with
/// probability 1 - slip; otherwise the agent moves the opposite way (left
/// and right) or to a uniformly chosen neighbour (stay and jump).
/// Rewards: 1.0 for pushing right at the last state, 0.2 for pushing left at
/// state 0. Observation u = 2s/(n-1) - 1 embedded as (u, u^2, cos(pi u), sin(pi u)).
struct ChainParams {
  int states = 5;
  int actions = 2;
  double slip = 0.1;
  double gamma = 0.9;
  int horizon = 200;
};

/// `grid-nav`: N x N grid, cell index y * N + x, plus one absorbing sink at
/// index N * N (reserved for terminal transitions; unreachable by default).
/// Actions: 0 up (+y), 1 down (-y), 2 left (-x), 3 right (+x); bumping into
/// the border or a wall leaves the agent in place.
/// Reward: `goal_reward` on the step that enters the goal, `step_cost`
/// otherwise. The goal is absorbing with zero reward.
/// Observation: (2x/(N-1) - 1, 2y/(N-1) - 1, (gx - x)/(N-1), (gy - y)/(N-1)),
/// every coordinate in [-1, 1].
/// With `random_goal` the goal is drawn uniformly over open cells at every
/// reset (before the start cell) and `goal` is ignored; the enumerated MDP is
/// then the (goal, position) product, index g * N * N + p, sink last.
struct GridParams {
  int size = 7;
  std::array<int, 2> goal{3, 3};
  double step_cost = -0.01;
  double goal_reward = 1.0;
  double gamma = 0.99;
  /// Uniform start over open non-goal cells; otherwise start at (0, 0).
  bool random_start = true;
  bool random_goal = false;
  std::vector<std::array<int, 2>> walls;
  int horizon = 200;
};

class GridNav : public Environment {
 public:
  explicit GridNav(GridParams p = {});

  std::string id() const override { return "grid-nav"; }
  std::size_t observation_dim() const override { return 4; }
  std::size_t action_count() const override { return 4; }
  nlohmann::json params() const override;
  std::unique_ptr<Environment> clone() const override { return std::make_unique<GridNav>(*this); }
  /// nullopt for random-goal grids with more than kMaxEnumeratedStates states.
  std::optional<MdpSpec> enumerate() const override;

  static constexpr std::size_t kMaxEnumeratedStates = 1024;

  /// Cell index y * N + x of the agent.
  std::size_t state() const { return cell(pos_); }
  std::array<int, 2> goal() const { return goal_; }
  Observation observe() const;

 protected:
  Observation do_reset() override;
  StepResult do_step(std::size_t action) override;
  nlohmann::json save_dynamics() const override;
  void load_dynamics(const nlohmann::json& s) override;

 private:
  std::size_t cell(const std::array<int, 2>& c) const { return static_cast<std::size_t>(c[1] * params_.size + c[0]); }
  std::array<int, 2> draw_open(const std::array<int, 2>& exclude);

  GridParams params_;
  std::vector<bool> wall_;
  std::vector<std::array<int, 2>> open_;
  std::array<int, 2> goal_{};
  std::array<int, 2> pos_{};
};

/// `cart-pole`: classic pole balancing (g = 9.8, cart 1.0 kg, pole 0.1 kg,
/// half-length 0.5 m, force 10 N, tau 0.02 s, Euler integration). Initial
/// state uniform in [-0.05, 0.05]^4. Terminates when |x| > 2.4 or
/// |theta| > 12 degrees. Reward 1 per step.
/// Observation scaling: (x / 2.4, x_dot / 3.0, theta / 0.2095, theta_dot / 3.5).
struct CartPoleParams {
  int horizon = 500;
};

class CartPole : public Environment {
 public:
  explicit CartPole(CartPoleParams p = {});

  std::string id() const override { return "cart-pole"; }
  std::size_t observation_dim() const override { return 4; }
  std::size_t action_count() const override { return 2; }
  nlohmann::json params() const override;
  std::unique_ptr<Environment> clone() const override { return std::make_unique<CartPole>(*this); }
  std::optional<MdpSpec> enumerate() const override { return std::nullopt; }

  /// Raw physical state (x, x_dot, theta, theta_dot).
  const std::array<double, 4>& physical_state() const { return state_; }

 protected:
  Observation do_reset() override;
  StepResult do_step(std::size_t action) override;
  nlohmann::json save_dynamics() const override;
  void load_dynamics(const nlohmann::json& s) override;

 private:
  Observation observe() const;

  CartPoleParams params_;
  std::array<double, 4> state_{};
};

MdpSpec make_chain_spec(const ChainParams& p);
MdpSpec make_grid_spec(const GridParams& p);

std::unique_ptr<TabularEnv> make_chain(const ChainParams& p);
std::unique_ptr<GridNav> make_grid_nav(const GridParams& p);

ChainParams parse_chain_params(const nlohmann::json& j);
GridParams parse_grid_params(const nlohmann::json& j);
CartPoleParams parse_cart_pole_params(const nlohmann::json& j);

/// Builds an environment from its string id and JSON parameter block.
/// Unknown ids or parameter keys throw ConfigError.
std::unique_ptr<Environment> make_environment(const std::string& id,
                                              const nlohmann::json& params = nlohmann::json::object());

std::vector<std::string> environment_ids();

}  // namespace advrl::envs
