#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "advrl/attacks/attacks.hpp"
#include "advrl/cli/cli.hpp"
#include "advrl/diff/mlp.hpp"
#include "advrl/errors.hpp"
#include "advrl/exact/solvers.hpp"
#include "advrl/training/trainer.hpp"

namespace advrl::cli {

policy::PolicyNet softmax_consistent_net(policy::PolicyNet base, const std::vector<double>& obs,
                                         const std::vector<double>& q_row, double mu) {
  if (q_row.size() != base.action_count()) throw ShapeError("Q row does not match the action count");
  const auto logits = diff::forward_mlp(base.mlp, diff::Tensor::vector(obs));
  auto& bias = base.mlp.layers.back().bias;
  for (std::size_t a = 0; a < q_row.size(); ++a) {
    const double target = std::isinf(mu) ? 0.0 : q_row[a] / mu;
    bias[a] += target - logits[a];
  }
  return base;
}

bool attack_argmax_sets_intersect(const policy::PolicyNet& net, const std::vector<double>& obs,
                                  const std::vector<double>& q_row, double epsilon, double grid_pitch) {
  const attacks::AttackObjective ce{attacks::ObjectiveTag::kCePgd, {}};
  const attacks::AttackObjective critic{attacks::ObjectiveTag::kCritic,
                                        [q_row](std::span<const double>) { return q_row; }};
  const auto a = attacks::brute_force_attack(net, obs, ce, epsilon, grid_pitch, 1e-10);
  const auto b = attacks::brute_force_attack(net, obs, critic, epsilon, grid_pitch, 1e-10);
  for (const auto& x : a.ties) {
    if (std::find(b.ties.begin(), b.ties.end(), x) != b.ties.end()) return true;
  }
  return false;
}

namespace {

std::string floor_label(double c) {
  std::ostringstream s;
  s << "C=" << c;
  return s.str();
}

}  // namespace

std::vector<PropertyResult> verify_suite(const envs::MdpSpec& mdp, const VerifyOptions& opts) {
  mdp.validate();
  std::vector<PropertyResult> results;
  for (double c : opts.entropy_floors) {
    const std::string label = floor_label(c);
    const std::vector<double> floors(mdp.state_count, c);
    const auto sol = exact::entropy_constrained_optimal_policy(mdp, floors);

    PropertyResult fixed{"softmax_fixed_point " + label, false, 0.0, 1e-8, ""};
    fixed.value = exact::softmax_relation_residual(mdp, sol.policy, sol.mu);
    fixed.passed = fixed.value <= fixed.tolerance;
    fixed.detail = std::to_string(sol.iterations) + " iterations";
    results.push_back(fixed);

    PropertyResult inverse{"temperature_inverse " + label, true, 0.0, 1e-8, ""};
    std::size_t finite = 0;
    for (std::size_t s = 0; s < mdp.state_count; ++s) {
      if (std::isinf(sol.mu[s])) continue;
      ++finite;
      const auto q = sol.q.row(s);
      const double h = exact::softmax_entropy(q, sol.mu[s]);
      const double back = exact::solve_temperature(q, h);
      const double err = std::max(std::abs(h - sol.entropy_target[s]), std::abs(back - sol.mu[s]) / sol.mu[s]);
      inverse.value = std::max(inverse.value, err);
    }
    inverse.passed = inverse.value <= inverse.tolerance;
    inverse.detail = std::to_string(finite) + " states with finite temperature";
    results.push_back(inverse);

    std::mt19937_64 cert_rng(training::derive_seed(opts.seed, 50, results.size()));
    const auto cert = exact::certify_local_optimality(sol, opts.certificate_samples, cert_rng);
    results.push_back({"local_optimality " + label, cert.passed, cert.worst_gain, 1e-10,
                       std::to_string(cert.samples_checked) + " feasible deviations"});

    PropertyResult equiv{"attack_equivalence " + label, true, 0.0, 0.0, ""};
    std::mt19937_64 rng(training::derive_seed(opts.seed, 51, results.size()));
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::size_t failed = 0;
    for (std::size_t s = 0; s < mdp.state_count; ++s) {
      const auto base = policy::make_policy_net(2, mdp.action_count, {{16, 16}, diff::Activation::kTanh}, rng, 1.0);
      const std::vector<double> obs{u(rng), u(rng)};
      const auto q = sol.q.row(s);
      std::vector<double> q_row(q.begin(), q.end());
      const auto net = softmax_consistent_net(base, obs, q_row, sol.mu[s]);
      if (opts.corrupt_q) std::reverse(q_row.begin(), q_row.end());
      if (!attack_argmax_sets_intersect(net, obs, q_row, opts.epsilon, opts.grid_pitch)) ++failed;
    }
    equiv.value = static_cast<double>(failed);
    equiv.passed = failed == 0;
    equiv.detail = std::to_string(failed) + " of " + std::to_string(mdp.state_count) + " states with disjoint argmax sets";
    results.push_back(equiv);
  }
  return results;
}

}  // namespace advrl::cli
