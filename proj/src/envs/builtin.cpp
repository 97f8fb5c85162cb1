#include "advrl/envs/builtin.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "advrl/errors.hpp"
#include "advrl/io/json_fields.hpp"

namespace advrl::envs {

// ---------------------------------------------------------------- chain-mdp

MdpSpec make_chain_spec(const ChainParams& p) {
  if (p.states < 2 || p.actions < 2 || p.actions > 4) {
    throw ConfigError("chain-mdp needs states >= 2 and 2..4 actions");
  }
  if (!(p.slip >= 0.0 && p.slip <= 1.0)) throw ConfigError("chain-mdp slip must lie in [0, 1]");
  const std::size_t n = static_cast<std::size_t>(p.states);
  const std::size_t k = static_cast<std::size_t>(p.actions);
  MdpSpec m = MdpSpec::empty(n, k, p.gamma);
  auto left = [](std::size_t s) { return s == 0 ? 0 : s - 1; };
  auto right = [n](std::size_t s) { return s + 1 == n ? s : s + 1; };
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t a = 0; a < k; ++a) {
      std::size_t intended = s;
      switch (a) {
        case 0: intended = left(s); break;
        case 1: intended = right(s); break;
        case 2: intended = s; break;
        case 3: intended = 0; break;
      }
      m.p(s, a, intended) += 1.0 - p.slip;
      if (a == 0) {
        m.p(s, a, right(s)) += p.slip;
      } else if (a == 1) {
        m.p(s, a, left(s)) += p.slip;
      } else {
        m.p(s, a, left(s)) += 0.5 * p.slip;
        m.p(s, a, right(s)) += 0.5 * p.slip;
      }
    }
    const double u = 2.0 * static_cast<double>(s) / static_cast<double>(n - 1) - 1.0;
    m.observation[s] = {u, u * u, std::cos(std::numbers::pi * u), std::sin(std::numbers::pi * u)};
  }
  m.r(n - 1, 1) = 1.0;
  m.r(0, 0) = 0.2;
  return m;
}

std::unique_ptr<TabularEnv> make_chain(const ChainParams& p) {
  nlohmann::json j = {{"states", p.states}, {"actions", p.actions}, {"slip", p.slip},
                      {"gamma", p.gamma},   {"horizon", p.horizon}};
  return std::make_unique<TabularEnv>(make_chain_spec(p), "chain-mdp", std::move(j), p.horizon);
}

ChainParams parse_chain_params(const nlohmann::json& j) {
  const std::string where = "chain-mdp params";
  io::reject_unknown_keys(j, {"states", "actions", "slip", "gamma", "horizon"}, where);
  ChainParams p;
  io::read_field(j, "states", p.states, where);
  io::read_field(j, "actions", p.actions, where);
  io::read_field(j, "slip", p.slip, where);
  io::read_field(j, "gamma", p.gamma, where);
  io::read_field(j, "horizon", p.horizon, where);
  return p;
}

// ----------------------------------------------------------------- grid-nav

namespace {

constexpr int kDx[4] = {0, 0, -1, 1};
constexpr int kDy[4] = {1, -1, 0, 0};

void check_grid(const GridParams& p) {
  if (p.size < 2) throw ConfigError("grid-nav size must be at least 2");
  auto inside = [&](const std::array<int, 2>& c) { return c[0] >= 0 && c[1] >= 0 && c[0] < p.size && c[1] < p.size; };
  if (!p.random_goal && !inside(p.goal)) throw ConfigError("grid-nav goal lies outside the grid");
  for (const auto& w : p.walls) {
    if (!inside(w)) throw ConfigError("grid-nav wall lies outside the grid");
    if (!p.random_goal && w == p.goal) throw ConfigError("grid-nav wall on the goal cell");
  }
  const std::size_t cells = static_cast<std::size_t>(p.size * p.size);
  std::vector<bool> wall(cells, false);
  for (const auto& w : p.walls) wall[static_cast<std::size_t>(w[1] * p.size + w[0])] = true;
  const auto open = static_cast<std::size_t>(std::count(wall.begin(), wall.end(), false));
  if (open < 2) throw ConfigError("grid-nav needs at least two open cells");
  if (!p.random_start && wall[0]) throw ConfigError("grid-nav fixed start (0,0) is not open");
  if (!p.random_start && !p.random_goal && p.goal == std::array<int, 2>{0, 0}) {
    throw ConfigError("grid-nav fixed start (0,0) is the goal");
  }
}

Observation grid_observation(int n, const std::array<int, 2>& pos, const std::array<int, 2>& goal) {
  const double span = static_cast<double>(n - 1);
  return {2.0 * pos[0] / span - 1.0, 2.0 * pos[1] / span - 1.0, (goal[0] - pos[0]) / span,
          (goal[1] - pos[1]) / span};
}

// Uniform distribution over the flagged entries, renormalized exactly: 1/k
// summed k times need not round to one.
void assign_uniform(std::vector<double>& start, const std::vector<bool>& eligible) {
  const auto k = static_cast<double>(std::count(eligible.begin(), eligible.end(), true));
  double total = 0.0;
  for (std::size_t s = 0; s < start.size(); ++s) {
    start[s] = eligible[s] ? 1.0 / k : 0.0;
    total += start[s];
  }
  for (std::size_t s = start.size(); s-- > 0;) {
    if (start[s] > 0.0) {
      start[s] += 1.0 - total;
      break;
    }
  }
}

}  // namespace

MdpSpec make_grid_spec(const GridParams& p) {
  check_grid(p);
  const int n = p.size;
  const std::size_t cells = static_cast<std::size_t>(n * n);
  std::vector<bool> wall(cells, false);
  for (const auto& w : p.walls) wall[static_cast<std::size_t>(w[1] * n + w[0])] = true;
  auto index = [n](int x, int y) { return static_cast<std::size_t>(y * n + x); };

  std::vector<std::array<int, 2>> goals;
  if (p.random_goal) {
    for (int y = 0; y < n; ++y) {
      for (int x = 0; x < n; ++x) goals.push_back({x, y});
    }
  } else {
    goals.push_back(p.goal);
  }
  const std::size_t states = goals.size() * cells + 1;
  if (p.random_goal && states > GridNav::kMaxEnumeratedStates) {
    throw ConfigError("random-goal grid-nav of size " + std::to_string(n) + " is too large to enumerate");
  }
  const std::size_t sink = states - 1;
  MdpSpec m = MdpSpec::empty(states, 4, p.gamma);
  std::vector<bool> eligible(states, false);
  for (std::size_t g = 0; g < goals.size(); ++g) {
    const std::size_t goal = index(goals[g][0], goals[g][1]);
    const bool goal_open = !wall[goal];
    for (int y = 0; y < n; ++y) {
      for (int x = 0; x < n; ++x) {
        const std::size_t c = index(x, y);
        const std::size_t s = g * cells + c;
        m.observation[s] = grid_observation(n, {x, y}, goals[g]);
        const bool absorbing = c == goal || wall[c] || !goal_open;
        m.terminal[s] = absorbing;
        for (std::size_t a = 0; a < 4; ++a) {
          if (absorbing) {
            m.p(s, a, s) = 1.0;
            continue;
          }
          const int nx = x + kDx[a], ny = y + kDy[a];
          const bool moves = nx >= 0 && ny >= 0 && nx < n && ny < n && !wall[index(nx, ny)];
          const std::size_t next = moves ? index(nx, ny) : c;
          m.p(s, a, g * cells + next) = 1.0;
          m.r(s, a) = next == goal ? p.goal_reward : p.step_cost;
        }
        eligible[s] = !absorbing && (p.random_start || c == 0);
      }
    }
  }
  m.observation[sink] = {-1.0, -1.0, -1.0, -1.0};
  m.terminal[sink] = true;
  for (std::size_t a = 0; a < 4; ++a) m.p(sink, a, sink) = 1.0;
  assign_uniform(m.start, eligible);
  return m;
}

GridNav::GridNav(GridParams p) : Environment(p.horizon), params_(std::move(p)) {
  check_grid(params_);
  const int n = params_.size;
  wall_.assign(static_cast<std::size_t>(n * n), false);
  for (const auto& w : params_.walls) wall_[cell(w)] = true;
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      if (!wall_[cell({x, y})]) open_.push_back({x, y});
    }
  }
  goal_ = params_.random_goal ? open_.front() : params_.goal;
}

nlohmann::json GridNav::params() const {
  nlohmann::json walls = nlohmann::json::array();
  for (const auto& w : params_.walls) walls.push_back({w[0], w[1]});
  return {{"size", params_.size},
          {"goal", {params_.goal[0], params_.goal[1]}},
          {"step_cost", params_.step_cost},
          {"goal_reward", params_.goal_reward},
          {"gamma", params_.gamma},
          {"random_start", params_.random_start},
          {"random_goal", params_.random_goal},
          {"walls", walls},
          {"horizon", params_.horizon}};
}

std::optional<MdpSpec> GridNav::enumerate() const {
  const auto cells = static_cast<std::size_t>(params_.size * params_.size);
  if (params_.random_goal && cells * cells + 1 > kMaxEnumeratedStates) return std::nullopt;
  return make_grid_spec(params_);
}

Observation GridNav::observe() const { return grid_observation(params_.size, pos_, goal_); }

std::array<int, 2> GridNav::draw_open(const std::array<int, 2>& exclude) {
  const bool skip = !wall_[cell(exclude)];
  std::uniform_int_distribution<std::size_t> pick(0, open_.size() - (skip ? 2 : 1));
  std::size_t i = pick(rng());
  if (skip && cell(open_[i]) >= cell(exclude)) ++i;
  return open_[i];
}

Observation GridNav::do_reset() {
  if (params_.random_goal) {
    goal_ = params_.random_start ? open_[std::uniform_int_distribution<std::size_t>(0, open_.size() - 1)(rng())]
                                 : draw_open({0, 0});
  }
  pos_ = params_.random_start ? draw_open(goal_) : std::array<int, 2>{0, 0};
  return observe();
}

StepResult GridNav::do_step(std::size_t action) {
  const int n = params_.size;
  const std::array<int, 2> next{pos_[0] + kDx[action], pos_[1] + kDy[action]};
  if (next[0] >= 0 && next[1] >= 0 && next[0] < n && next[1] < n && !wall_[cell(next)]) pos_ = next;
  StepResult r;
  r.terminated = pos_ == goal_;
  r.reward = r.terminated ? params_.goal_reward : params_.step_cost;
  r.observation = observe();
  return r;
}

nlohmann::json GridNav::save_dynamics() const { return {{"pos", pos_}, {"goal", goal_}}; }

void GridNav::load_dynamics(const nlohmann::json& s) {
  pos_ = s.at("pos").get<std::array<int, 2>>();
  goal_ = s.at("goal").get<std::array<int, 2>>();
}

std::unique_ptr<GridNav> make_grid_nav(const GridParams& p) { return std::make_unique<GridNav>(p); }

GridParams parse_grid_params(const nlohmann::json& j) {
  const std::string where = "grid-nav params";
  io::reject_unknown_keys(
      j, {"size", "goal", "step_cost", "goal_reward", "gamma", "random_start", "random_goal", "walls", "horizon"},
      where);
  GridParams p;
  io::read_field(j, "size", p.size, where);
  io::read_field(j, "goal", p.goal, where);
  io::read_field(j, "step_cost", p.step_cost, where);
  io::read_field(j, "goal_reward", p.goal_reward, where);
  io::read_field(j, "gamma", p.gamma, where);
  io::read_field(j, "random_start", p.random_start, where);
  io::read_field(j, "random_goal", p.random_goal, where);
  io::read_field(j, "walls", p.walls, where);
  io::read_field(j, "horizon", p.horizon, where);
  return p;
}

// ---------------------------------------------------------------- cart-pole

namespace {
constexpr double kGravity = 9.8;
constexpr double kMassCart = 1.0;
constexpr double kMassPole = 0.1;
constexpr double kTotalMass = kMassCart + kMassPole;
constexpr double kHalfLength = 0.5;
constexpr double kPoleMassLength = kMassPole * kHalfLength;
constexpr double kForce = 10.0;
constexpr double kTau = 0.02;
constexpr double kThetaLimit = 12.0 * 2.0 * std::numbers::pi / 360.0;
constexpr double kXLimit = 2.4;
constexpr std::array<double, 4> kObsScale{2.4, 3.0, 0.2095, 3.5};
}  // namespace

CartPole::CartPole(CartPoleParams p) : Environment(p.horizon), params_(p) {}

nlohmann::json CartPole::params() const { return {{"horizon", params_.horizon}}; }

Observation CartPole::observe() const {
  Observation o(4);
  for (std::size_t i = 0; i < 4; ++i) o[i] = state_[i] / kObsScale[i];
  return o;
}

Observation CartPole::do_reset() {
  std::uniform_real_distribution<double> u(-0.05, 0.05);
  for (double& v : state_) v = u(rng());
  return observe();
}

StepResult CartPole::do_step(std::size_t action) {
  auto [x, x_dot, theta, theta_dot] = state_;
  const double force = action == 1 ? kForce : -kForce;
  const double cos_t = std::cos(theta), sin_t = std::sin(theta);
  const double temp = (force + kPoleMassLength * theta_dot * theta_dot * sin_t) / kTotalMass;
  const double theta_acc = (kGravity * sin_t - cos_t * temp) /
                           (kHalfLength * (4.0 / 3.0 - kMassPole * cos_t * cos_t / kTotalMass));
  const double x_acc = temp - kPoleMassLength * theta_acc * cos_t / kTotalMass;
  x += kTau * x_dot;
  x_dot += kTau * x_acc;
  theta += kTau * theta_dot;
  theta_dot += kTau * theta_acc;
  state_ = {x, x_dot, theta, theta_dot};

  StepResult r;
  r.observation = observe();
  r.reward = 1.0;
  r.terminated = x < -kXLimit || x > kXLimit || theta < -kThetaLimit || theta > kThetaLimit;
  return r;
}

nlohmann::json CartPole::save_dynamics() const { return {{"state", state_}}; }

void CartPole::load_dynamics(const nlohmann::json& s) {
  state_ = s.at("state").get<std::array<double, 4>>();
}

CartPoleParams parse_cart_pole_params(const nlohmann::json& j) {
  const std::string where = "cart-pole params";
  io::reject_unknown_keys(j, {"horizon"}, where);
  CartPoleParams p;
  io::read_field(j, "horizon", p.horizon, where);
  return p;
}

// ----------------------------------------------------------------- registry

std::unique_ptr<Environment> make_environment(const std::string& id, const nlohmann::json& params) {
  const nlohmann::json& j = params.is_null() ? nlohmann::json::object() : params;
  if (id == "chain-mdp") return make_chain(parse_chain_params(j));
  if (id == "grid-nav") return make_grid_nav(parse_grid_params(j));
  if (id == "cart-pole") return std::make_unique<CartPole>(parse_cart_pole_params(j));
  throw ConfigError("unknown environment id '" + id + "'");
}

std::vector<std::string> environment_ids() { return {"chain-mdp", "grid-nav", "cart-pole"}; }

}  // namespace advrl::envs
