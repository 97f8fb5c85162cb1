#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "advrl/attacks/attacks.hpp"
#include "advrl/envs/builtin.hpp"
#include "advrl/errors.hpp"
#include "test_support.hpp"

using namespace advrl;
using namespace advrl::attacks;
using policy::PolicyNet;

namespace {

PolicyNet random_policy(std::mt19937_64& rng, std::size_t obs, std::size_t actions) {
  return {oracle::random_mlp(rng, obs, actions)};
}

// Single linear layer with logits = W x + b.
PolicyNet linear_policy(std::vector<double> w, std::vector<double> b, std::size_t in) {
  diff::Layer l;
  l.weight = diff::Tensor::matrix(b.size(), in, std::move(w));
  l.bias = diff::Tensor::vector(std::move(b));
  l.activation = diff::Activation::kLinear;
  return {diff::MlpParams{{l}}};
}

double max_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

std::vector<double> add(std::span<const double> a, const std::vector<double>& b) {
  std::vector<double> out(a.begin(), a.end());
  for (std::size_t i = 0; i < b.size(); ++i) out[i] += b[i];
  return out;
}

AttackObjective constant_q(std::vector<double> q) {
  return {ObjectiveTag::kCritic, [q](std::span<const double>) { return q; }};
}

bool intersect(const std::vector<std::vector<double>>& a, const std::vector<std::vector<double>>& b) {
  for (const auto& x : a) {
    if (std::find(b.begin(), b.end(), x) != b.end()) return true;
  }
  return false;
}

const ObjectiveTag kGradientTags[] = {ObjectiveTag::kCePgd, ObjectiveTag::kMaxPgd, ObjectiveTag::kMinPgd};

}  // namespace

TEST(Budget, DefaultsAndValidation) {
  const auto b = PerturbationBudget::with_epsilon(0.1);
  EXPECT_EQ(b.steps, 7);
  EXPECT_DOUBLE_EQ(b.alpha, 0.05);
  EXPECT_EQ(b.init, Init::kUniform);
  auto bad = b;
  bad.epsilon = -1.0;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = b;
  bad.steps = 0;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = b;
  bad.alpha = 0.0;
  EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(Pgd, ZeroEpsilonLeavesObservationUntouched) {
  std::mt19937_64 rng(1);
  const auto net = random_policy(rng, 3, 4);
  const auto obs = oracle::random_vector(rng, 3);
  for (auto tag : {ObjectiveTag::kCePgd, ObjectiveTag::kMaxPgd, ObjectiveTag::kMinPgd, ObjectiveTag::kRandom}) {
    const auto out = pgd_attack(net, obs, {tag, {}}, PerturbationBudget::with_epsilon(0.0), rng);
    EXPECT_EQ(out.delta, std::vector<double>(3, 0.0)) << to_string(tag);
    EXPECT_EQ(out.perturbed_dist.probabilities, out.clean_dist.probabilities) << to_string(tag);
  }
}

TEST(Pgd, ProjectionIsExact) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> eps(0.001, 0.5);
  for (int i = 0; i < 300; ++i) {
    const auto net = random_policy(rng, 4, 3);
    const auto obs = oracle::random_vector(rng, 4, -3.0, 3.0);
    auto budget = PerturbationBudget::with_epsilon(eps(rng));
    budget.alpha = budget.epsilon * 0.9;  // overshooting step forces clamping
    const auto tag = kGradientTags[i % 3];
    const auto out = pgd_attack(net, obs, {tag, {}}, budget, rng);
    EXPECT_LE(max_abs(out.delta), budget.epsilon);
  }
}

TEST(Pgd, BestIterateNeverWorseThanStart) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 300; ++i) {
    const auto net = random_policy(rng, 3, 3);
    const auto obs = oracle::random_vector(rng, 3);
    const auto out = pgd_attack(net, obs, {kGradientTags[i % 3], {}}, PerturbationBudget::with_epsilon(0.3), rng);
    ASSERT_EQ(out.objective_trace.size(), 8u);
    EXPECT_GE(out.best_objective(), out.objective_trace.front());
    EXPECT_EQ(out.best_objective(), *std::max_element(out.objective_trace.begin(), out.objective_trace.end()));
  }
}

TEST(Pgd, ReturnedValueMatchesDirectEvaluation) {
  std::mt19937_64 rng(4);
  const auto net = random_policy(rng, 2, 3);
  const auto obs = oracle::random_vector(rng, 2);
  const auto out = pgd_attack(net, obs, {ObjectiveTag::kCePgd, {}}, PerturbationBudget::with_epsilon(0.2), rng);
  EXPECT_NEAR(out.best_objective(), ce_objective(net, obs, add(obs, out.delta)), 1e-13);
  EXPECT_NEAR(policy::cross_entropy(out.perturbed_dist, out.clean_dist), out.best_objective(), 1e-13);
}

TEST(Pgd, NearGridOptimumInTwoDimensions) {
  std::mt19937_64 rng(5);
  auto budget = PerturbationBudget::with_epsilon(0.1);
  for (int i = 0; i < 30; ++i) {
    const auto net = random_policy(rng, 2, 3);
    const auto obs = oracle::random_vector(rng, 2);
    for (auto tag : kGradientTags) {
      const auto pgd = pgd_attack(net, obs, {tag, {}}, budget, rng);
      const auto brute = brute_force_attack(net, obs, {tag, {}}, 0.1, 0.005);
      if (tag == ObjectiveTag::kMinPgd) {
        // log-probability objective is negative; compare the target probability.
        EXPECT_GE(std::exp(pgd.best_objective()), 0.95 * std::exp(brute.value)) << i;
      } else {
        EXPECT_GE(pgd.best_objective(), 0.95 * brute.value) << to_string(tag) << " " << i;
      }
    }
  }
}

TEST(Pgd, RandomObjectiveStaysInBall) {
  std::mt19937_64 rng(6);
  const auto net = random_policy(rng, 3, 2);
  const auto obs = oracle::random_vector(rng, 3);
  const auto out = pgd_attack(net, obs, {ObjectiveTag::kRandom, {}}, PerturbationBudget::with_epsilon(0.2), rng);
  EXPECT_TRUE(out.objective_trace.empty());
  EXPECT_LE(max_abs(out.delta), 0.2);
  EXPECT_GT(max_abs(out.delta), 0.0);
}

TEST(Pgd, CriticNeedsQProvider) {
  std::mt19937_64 rng(7);
  const auto net = random_policy(rng, 2, 2);
  EXPECT_THROW(pgd_attack(net, std::vector<double>{0.0, 0.0}, {ObjectiveTag::kCritic, {}},
                          PerturbationBudget::with_epsilon(0.1), rng),
               ConfigError);
}

TEST(Pgd, UniformAgentIsUnaffected) {
  std::mt19937_64 rng(8);
  PolicyNet net = random_policy(rng, 3, 4);
  net.mlp = net.mlp.zeros_like();
  const auto obs = oracle::random_vector(rng, 3);
  const auto out = pgd_attack(net, obs, {ObjectiveTag::kCePgd, {}}, PerturbationBudget::with_epsilon(0.5), rng);
  EXPECT_EQ(out.perturbed_dist.probabilities, out.clean_dist.probabilities);
  for (double v : out.objective_trace) EXPECT_NEAR(v, std::log(4.0), 1e-15);
}

TEST(CeObjective, CleanPointGivesEntropy) {
  std::mt19937_64 rng(9);
  const auto net = random_policy(rng, 3, 4);
  const auto obs = oracle::random_vector(rng, 3);
  EXPECT_NEAR(ce_objective(net, obs, obs), policy::entropy(policy::dist(net, obs)), 1e-14);
}

TEST(CeObjective, FlippingConfidentChoiceIsExpensive) {
  // logits = (50 x, -50 x): at x = 0.1 action 0 has probability 1 - 2e-9.
  const auto net = linear_policy({50.0, -50.0}, {0.0, 0.0}, 1);
  const std::vector<double> clean{0.1}, flipped{-0.1};
  const auto d = policy::dist(net, clean);
  const double p_min = *std::min_element(d.probabilities.begin(), d.probabilities.end());
  EXPECT_GE(ce_objective(net, clean, flipped), -std::log(p_min) * 0.999);
  std::mt19937_64 rng(0);
  const auto out = pgd_attack(net, clean, {ObjectiveTag::kCePgd, {}}, PerturbationBudget::with_epsilon(0.2), rng);
  EXPECT_EQ(out.perturbed_dist.argmax(), 1u);
}

TEST(CeObjective, UniformCleanDistributionIsConstant) {
  std::mt19937_64 rng(10);
  PolicyNet net = random_policy(rng, 2, 3);
  net.mlp = net.mlp.zeros_like();
  for (int i = 0; i < 20; ++i) {
    EXPECT_NEAR(ce_objective(net, oracle::random_vector(rng, 2), oracle::random_vector(rng, 2)), std::log(3.0), 1e-15);
  }
}

TEST(CeObjective, GradientIgnoresCleanFactor) {
  std::mt19937_64 rng(11);
  const auto net = random_policy(rng, 3, 3);
  const auto clean = oracle::random_vector(rng, 3);
  const auto x = oracle::random_vector(rng, 3);
  const ObjectiveFunction f(net, clean, {ObjectiveTag::kCePgd, {}});
  std::vector<double> g;
  f.value_and_gradient(x, g);
  // Finite differences move only x; the clean distribution stays fixed.
  const auto fd = oracle::central_difference([&](const std::vector<double>& y) { return f.value(y); }, x);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_LE(oracle::relative_error(g[i], fd[i]), 1e-4);
}

TEST(MaxMinObjectives, CleanPointValuesAndTargets) {
  std::mt19937_64 rng(12);
  const auto net = random_policy(rng, 2, 2);
  const auto obs = oracle::random_vector(rng, 2);
  const auto d = policy::dist(net, obs);
  EXPECT_NEAR(max_pgd_objective(net, obs, obs), -d.log_probabilities[d.argmax()], 1e-15);
  EXPECT_NEAR(min_pgd_objective(net, obs, obs), d.log_probabilities[d.argmin()], 1e-15);
  const auto a = pgd_attack(net, obs, {ObjectiveTag::kMaxPgd, {}}, PerturbationBudget::with_epsilon(0.1), rng);
  const auto b = pgd_attack(net, obs, {ObjectiveTag::kMinPgd, {}}, PerturbationBudget::with_epsilon(0.1), rng);
  EXPECT_EQ(*a.target_action + *b.target_action, 1u);
}

TEST(MaxMinObjectives, TiesBreakToLowestIndex) {
  PolicyNet net = linear_policy({0.0, 0.0, 0.0}, {0.0, 0.0, 0.0}, 1);
  const ObjectiveFunction mx(net, std::vector<double>{0.0}, {ObjectiveTag::kMaxPgd, {}});
  const ObjectiveFunction mn(net, std::vector<double>{0.0}, {ObjectiveTag::kMinPgd, {}});
  EXPECT_EQ(*mx.target_action(), 0u);
  EXPECT_EQ(*mn.target_action(), 0u);
}

TEST(MaxMinObjectives, MinPgdCanTargetLowestQ) {
  std::mt19937_64 rng(13);
  const auto net = random_policy(rng, 2, 3);
  AttackObjective obj{ObjectiveTag::kMinPgd, [](std::span<const double>) { return std::vector<double>{1.0, -2.0, 0.5}; }};
  const ObjectiveFunction f(net, std::vector<double>{0.1, 0.2}, obj);
  EXPECT_EQ(*f.target_action(), 1u);
}

TEST(CriticObjective, ConstantQIsFlat) {
  std::mt19937_64 rng(14);
  const auto net = random_policy(rng, 2, 3);
  const std::vector<double> q(3, 2.5);
  const ObjectiveFunction f(net, std::vector<double>{0.0, 0.0}, constant_q(q));
  std::vector<double> g;
  for (int i = 0; i < 10; ++i) {
    EXPECT_NEAR(f.value_and_gradient(oracle::random_vector(rng, 2), g), -2.5, 1e-14);
    EXPECT_LE(max_abs(g), 1e-14);
  }
}

TEST(CriticObjective, CleanPointIsMinusStateValue) {
  envs::ChainParams p;
  p.states = 6;
  p.actions = 3;
  const auto mdp = envs::make_chain_spec(p);
  std::mt19937_64 rng(15);
  const auto net = random_policy(rng, mdp.observation_dim(), 3);
  exact::TabularPolicy pi{mdp.state_count, 3, {}};
  for (const auto& o : mdp.observation) {
    const auto d = policy::dist(net, o);
    pi.prob.insert(pi.prob.end(), d.probabilities.begin(), d.probabilities.end());
  }
  const auto ev = exact::policy_evaluation(mdp, pi);
  const AttackObjective obj{ObjectiveTag::kCritic, table_q_provider(mdp, ev.q)};
  for (std::size_t s = 0; s < mdp.state_count; ++s) {
    const ObjectiveFunction f(net, mdp.observation[s], obj);
    EXPECT_NEAR(f.value(mdp.observation[s]), -ev.v[s], 1e-12);
  }
}

TEST(RandomPerturbation, SupportAndZeroRadius) {
  std::mt19937_64 rng(16);
  const std::vector<double> obs(5, 0.0);
  EXPECT_EQ(random_perturbation(obs, 0.0, rng), obs);
  for (int i = 0; i < 1000; ++i) EXPECT_LE(max_abs(random_perturbation(obs, 0.3, rng)), 0.3);
}

TEST(RandomPerturbation, MeanIsZero) {
  std::mt19937_64 rng(17);
  const int n = 100000;
  const double eps = 0.5;
  std::vector<double> sum(3, 0.0);
  for (int i = 0; i < n; ++i) {
    const auto d = random_perturbation(std::vector<double>(3, 0.0), eps, rng);
    for (std::size_t k = 0; k < 3; ++k) sum[k] += d[k];
  }
  const double sigma = eps / std::sqrt(3.0) / std::sqrt(static_cast<double>(n));
  for (double s : sum) EXPECT_LE(std::abs(s / n), 3.0 * sigma);
}

TEST(BruteForce, ZeroEpsilon) {
  std::mt19937_64 rng(18);
  const auto net = random_policy(rng, 2, 3);
  const auto r = brute_force_attack(net, std::vector<double>{0.2, 0.1}, {ObjectiveTag::kCePgd, {}}, 0.0, 0.01);
  EXPECT_EQ(r.delta, std::vector<double>(2, 0.0));
}

TEST(BruteForce, LinearPolicyOptimumAtCorner) {
  const auto net = linear_policy({2.0, -1.0}, {0.3, 0.0}, 1);
  const auto r = brute_force_attack(net, std::vector<double>{0.4}, {ObjectiveTag::kMaxPgd, {}}, 0.25, 0.01);
  ASSERT_EQ(r.delta.size(), 1u);
  EXPECT_EQ(std::abs(r.delta[0]), 0.25);
}

TEST(BruteForce, DominatesGridAlignedPgd) {
  std::mt19937_64 rng(19);
  auto budget = PerturbationBudget::with_epsilon(0.1);
  budget.init = Init::kZero;  // iterates stay on the 0.05 lattice, a subset of the grid
  for (int i = 0; i < 50; ++i) {
    const auto net = random_policy(rng, 2, 3);
    const auto obs = oracle::random_vector(rng, 2);
    for (auto tag : kGradientTags) {
      const auto pgd = pgd_attack(net, obs, {tag, {}}, budget, rng);
      const auto brute = brute_force_attack(net, obs, {tag, {}}, 0.1, 0.005);
      EXPECT_GE(brute.value, pgd.best_objective() - 1e-12);
    }
  }
}

TEST(BruteForce, RejectsHighDimensions) {
  std::mt19937_64 rng(20);
  const auto net = random_policy(rng, 4, 2);
  EXPECT_THROW(brute_force_attack(net, std::vector<double>(4, 0.0), {ObjectiveTag::kCePgd, {}}, 0.1, 0.01),
               UsageError);
}

TEST(Equivalence, PolicyAndCriticAttacksAgreeUnderSoftmaxRelation) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> mu_dist(0.1, 5.0), c_dist(-3.0, 3.0);
  for (int i = 0; i < 200; ++i) {
    const auto net = random_policy(rng, 2, 3);
    const auto obs = oracle::random_vector(rng, 2);
    const double mu = mu_dist(rng), c = c_dist(rng);
    const auto logits = diff::forward_mlp(net.mlp, diff::Tensor::vector(obs));
    std::vector<double> q;
    for (double l : logits.values()) q.push_back(mu * l + c);
    const auto ce = brute_force_attack(net, obs, {ObjectiveTag::kCePgd, {}}, 0.1, 0.01, 1e-10);
    const auto critic = brute_force_attack(net, obs, constant_q(q), 0.1, 0.01, 1e-10);
    EXPECT_TRUE(intersect(ce.ties, critic.ties)) << "construction " << i;
  }
}

TEST(Equivalence, CriticArgmaxInvariantToAffineQ) {
  std::mt19937_64 rng(22);
  for (int i = 0; i < 50; ++i) {
    const auto net = random_policy(rng, 2, 4);
    const auto obs = oracle::random_vector(rng, 2);
    const auto q = oracle::random_vector(rng, 4, -2.0, 2.0);
    std::vector<double> q2;
    for (double v : q) q2.push_back(3.7 * v - 1.2);
    const auto a = brute_force_attack(net, obs, constant_q(q), 0.1, 0.01, 1e-10);
    const auto b = brute_force_attack(net, obs, constant_q(q2), 0.1, 0.01, 1e-10);
    EXPECT_TRUE(intersect(a.ties, b.ties));
  }
}

TEST(Records, JsonHasEveryField) {
  std::mt19937_64 rng(23);
  const auto net = random_policy(rng, 2, 3);
  const std::vector<double> obs{0.1, -0.2};
  const auto budget = PerturbationBudget::with_epsilon(0.1);
  const auto out = pgd_attack(net, obs, {ObjectiveTag::kCePgd, {}}, budget, rng);
  const auto j = to_json(out, obs, ObjectiveTag::kCePgd, budget);
  for (const char* key : {"objective", "epsilon", "clean_obs", "delta", "clean_dist", "perturbed_dist",
                          "objective_trace", "best_iterate", "target_action"}) {
    EXPECT_TRUE(j.contains(key)) << key;
  }
  EXPECT_EQ(j["delta"].get<std::vector<double>>(), out.delta);
}

TEST(Records, ObjectiveNamesRoundTrip) {
  for (auto tag : {ObjectiveTag::kCePgd, ObjectiveTag::kMaxPgd, ObjectiveTag::kMinPgd, ObjectiveTag::kCritic,
                   ObjectiveTag::kRandom}) {
    EXPECT_EQ(objective_from_string(to_string(tag)), tag);
  }
  EXPECT_THROW(objective_from_string("fgsm"), ConfigError);
}
