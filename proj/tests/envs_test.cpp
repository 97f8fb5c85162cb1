#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>

#include "advrl/envs/builtin.hpp"
#include "advrl/errors.hpp"

using namespace advrl;
using namespace advrl::envs;

namespace {

MdpSpec two_state_spec(double p_stay) {
  MdpSpec m = MdpSpec::empty(2, 1, 0.9);
  m.p(0, 0, 0) = p_stay;
  m.p(0, 0, 1) = 1.0 - p_stay;
  m.p(1, 0, 1) = 1.0;
  m.terminal = {false, false};
  m.observation = {{0.0, 0.0}, {1.0, 0.0}};
  return m;
}

}  // namespace

TEST(GridNav, ResetIsDeterministicPerSeed) {
  auto env = make_environment("grid-nav");
  const auto a = env->reset(7);
  const auto b = env->reset(7);
  EXPECT_EQ(a, b);
}

TEST(GridNav, MoveRightFromOrigin) {
  GridParams p;
  p.random_start = false;
  auto env = make_grid_nav(p);
  env->reset(0);
  EXPECT_EQ(env->state(), 0u);
  const auto r = env->step(3);
  EXPECT_EQ(env->state(), 1u);  // (1, 0)
  EXPECT_DOUBLE_EQ(r.reward, p.step_cost);
  EXPECT_FALSE(r.done());
  EXPECT_EQ(r.observation, (std::vector<double>{2.0 / 6 - 1.0, -1.0, 2.0 / 6, 3.0 / 6}));
}

TEST(GridNav, EnumerateFourByFour) {
  GridParams p;
  p.size = 4;
  p.goal = {3, 3};
  const MdpSpec m = *make_grid_nav(p)->enumerate();
  EXPECT_EQ(m.state_count, 17u);
  EXPECT_EQ(m.action_count, 4u);
  const std::size_t goal = 15, sink = 16;
  // Brute force: from the goal and the sink, every action stays put with zero reward.
  for (std::size_t s : {goal, sink}) {
    EXPECT_TRUE(m.terminal[s]);
    for (std::size_t a = 0; a < 4; ++a) {
      EXPECT_EQ(m.p(s, a, s), 1.0);
      EXPECT_EQ(m.r(s, a), 0.0);
    }
  }
  // Entering the goal pays the goal reward.
  EXPECT_EQ(m.p(14, 3, goal), 1.0);
  EXPECT_EQ(m.r(14, 3), p.goal_reward);
  EXPECT_NO_THROW(m.validate());
}

TEST(GridNav, ObservationsInUnitBox) {
  const MdpSpec m = *make_grid_nav({})->enumerate();
  for (const auto& o : m.observation) {
    ASSERT_EQ(o.size(), 4u);
    for (double v : o) {
      EXPECT_GE(v, -1.0);
      EXPECT_LE(v, 1.0);
    }
  }
}

TEST(GridNav, WallsBlockMovement) {
  GridParams p;
  p.random_start = false;
  p.walls = {{1, 0}};
  auto env = make_grid_nav(p);
  env->reset(0);
  env->step(3);
  EXPECT_EQ(env->state(), 0u);
}

TEST(GridNav, RandomGoalObservationEncodesOffset) {
  GridParams p;
  p.size = 9;
  p.random_goal = true;
  GridNav env(p);
  std::set<std::array<int, 2>> goals;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto obs = env.reset(seed);
    const auto g = env.goal();
    goals.insert(g);
    const int x = static_cast<int>(env.state() % 9), y = static_cast<int>(env.state() / 9);
    EXPECT_FALSE(x == g[0] && y == g[1]);
    EXPECT_EQ(obs[2], (g[0] - x) / 8.0);
    EXPECT_EQ(obs[3], (g[1] - y) / 8.0);
  }
  EXPECT_GT(goals.size(), 40u);
}

TEST(GridNav, RandomGoalEnumerationMatchesSimulation) {
  GridParams p;
  p.size = 3;
  p.random_goal = true;
  p.walls = {{1, 1}};
  GridNav env(p);
  const MdpSpec m = *env.enumerate();
  EXPECT_EQ(m.state_count, 82u);
  EXPECT_NO_THROW(m.validate());
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<std::size_t> act(0, 3);
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    auto obs = env.reset(seed);
    std::size_t s = m.find_state(obs);
    ASSERT_LT(s, m.state_count);
    ASSERT_GT(m.start[s], 0.0);
    while (true) {
      const std::size_t a = act(rng);
      const auto r = env.step(a);
      const std::size_t next = m.find_state(r.observation);
      ASSERT_LT(next, m.state_count);
      EXPECT_EQ(m.p(s, a, next), 1.0);
      EXPECT_EQ(m.r(s, a), r.reward);
      EXPECT_EQ(m.terminal[next], r.terminated);
      if (r.done()) break;
      s = next;
    }
  }
}

TEST(GridNav, LargeRandomGoalGridIsNotEnumerated) {
  GridParams p;
  p.size = 25;
  p.random_goal = true;
  EXPECT_FALSE(GridNav(p).enumerate().has_value());
  EXPECT_THROW(make_grid_spec(p), ConfigError);
}

TEST(GridNav, RejectsBadLayouts) {
  GridParams p;
  p.goal = {7, 0};
  EXPECT_THROW(GridNav{p}, ConfigError);
  p.goal = {3, 3};
  p.walls = {{3, 3}};
  EXPECT_THROW(GridNav{p}, ConfigError);
  p.walls = {};
  p.size = 1;
  EXPECT_THROW(GridNav{p}, ConfigError);
}

TEST(Environment, StepAfterDoneRejected) {
  GridParams p;
  p.size = 2;
  p.goal = {1, 0};
  p.random_start = false;
  auto env = make_grid_nav(p);
  env->reset(0);
  const auto r = env->step(3);
  EXPECT_TRUE(r.terminated);
  EXPECT_THROW(env->step(0), UsageError);
  env->reset(1);
  EXPECT_NO_THROW(env->step(0));
}

TEST(Environment, OutOfRangeActionRejected) {
  auto env = make_environment("chain-mdp");
  env->reset(0);
  EXPECT_THROW(env->step(2), UsageError);
}

TEST(Environment, HorizonTruncates) {
  ChainParams p;
  p.horizon = 5;
  auto env = make_chain(p);
  env->reset(0);
  StepResult r;
  for (int i = 0; i < 5; ++i) r = env->step(1);
  EXPECT_TRUE(r.truncated);
  EXPECT_FALSE(r.terminated);
  EXPECT_THROW(env->step(1), UsageError);
}

TEST(Environment, UnknownIdOrKeyIsConfigError) {
  EXPECT_THROW(make_environment("pong"), ConfigError);
  EXPECT_THROW(make_environment("grid-nav", {{"sise", 4}}), ConfigError);
}

TEST(Environment, SameSeedAndActionsGiveIdenticalTrajectories) {
  for (const auto& id : environment_ids()) {
    auto a = make_environment(id);
    auto b = make_environment(id);
    std::mt19937_64 rng(99);
    auto oa = a->reset(5);
    auto ob = b->reset(5);
    EXPECT_EQ(oa, ob) << id;
    for (int t = 0; t < 100 && !a->done(); ++t) {
      const std::size_t act = rng() % a->action_count();
      const auto ra = a->step(act);
      const auto rb = b->step(act);
      EXPECT_EQ(ra.observation, rb.observation) << id;
      EXPECT_EQ(ra.reward, rb.reward) << id;
      EXPECT_EQ(ra.done(), rb.done()) << id;
      EXPECT_EQ(ra.observation.size(), a->observation_dim()) << id;
    }
  }
}

TEST(Environment, SaveAndLoadStateResumesExactly) {
  for (const auto& id : environment_ids()) {
    auto a = make_environment(id);
    a->reset(3);
    for (int t = 0; t < 4; ++t) a->step(1);
    auto b = make_environment(id);
    b->load_state(a->save_state());
    for (int t = 0; t < 20 && !a->done(); ++t) {
      EXPECT_EQ(a->step(t % 2).observation, b->step(t % 2).observation) << id;
    }
  }
}

TEST(Tabular, ResetObservesStartState) {
  auto env = make_chain({});
  const auto obs = env->reset(11);
  EXPECT_EQ(obs, env->spec().observation[0]);
}

TEST(Tabular, DeterministicRowAlwaysLands) {
  TabularEnv env(two_state_spec(0.0), "two", {}, 200);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    env.reset(seed);
    env.step(0);
    EXPECT_EQ(env.state(), 1u);
  }
}

TEST(Tabular, EmpiricalTransitionFrequencies) {
  TabularEnv env(two_state_spec(0.3), "two", {}, 200);
  int stays = 0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    env.reset(static_cast<std::uint64_t>(i));
    env.step(0);
    if (env.state() == 0) ++stays;
  }
  EXPECT_NEAR(stays / static_cast<double>(n), 0.3, 0.02);
}

TEST(Chain, EnumerateFiveStates) {
  ChainParams p;
  p.states = 5;
  p.actions = 3;
  const MdpSpec m = *make_chain(p)->enumerate();
  EXPECT_EQ(m.transition.size(), 5u * 3u * 5u);
  for (std::size_t s = 0; s < 5; ++s) {
    for (std::size_t a = 0; a < 3; ++a) {
      double total = 0.0;
      for (std::size_t n = 0; n < 5; ++n) total += m.p(s, a, n);
      EXPECT_NEAR(total, 1.0, 1e-12);
    }
  }
  EXPECT_EQ(m.observation_dim(), 4u);
}

TEST(Chain, ObservationsAreDistinctAcrossSizes) {
  for (int n = 5; n <= 20; ++n) {
    for (int k = 2; k <= 4; ++k) {
      ChainParams p;
      p.states = n;
      p.actions = k;
      EXPECT_NO_THROW(make_chain_spec(p).validate());
    }
  }
}

TEST(CartPole, NotEnumerable) { EXPECT_FALSE(make_environment("cart-pole")->enumerate().has_value()); }

TEST(CartPole, InitialStateInDocumentedBox) {
  CartPole env;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    env.reset(seed);
    for (double v : env.physical_state()) {
      EXPECT_GE(v, -0.05);
      EXPECT_LE(v, 0.05);
    }
  }
}

TEST(CartPole, ReturnBoundedByHorizon) {
  CartPole env;
  env.reset(0);
  double ret = 0.0;
  int steps = 0;
  while (!env.done()) {
    // Simple stabilizing controller keeps the pole up until the cap.
    const auto& s = env.physical_state();
    ret += env.step(s[2] + 0.5 * s[3] > 0.0 ? 1 : 0).reward;
    ++steps;
  }
  EXPECT_LE(steps, 500);
  EXPECT_LE(ret, 500.0);
}

TEST(MdpSpec, ValidateCatchesBadRows) {
  MdpSpec m = two_state_spec(0.3);
  m.p(0, 0, 1) = 0.5;
  EXPECT_THROW(m.validate(), UsageError);
  MdpSpec d = two_state_spec(0.3);
  d.observation[1] = d.observation[0];
  EXPECT_THROW(d.validate(), UsageError);
}
