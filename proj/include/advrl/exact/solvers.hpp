#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include "advrl/envs/mdp_spec.hpp"

namespace advrl::exact {

/// State x action table of probabilities, rows on the simplex.
struct TabularPolicy {
  std::size_t state_count = 0;
  std::size_t action_count = 0;
  std::vector<double> prob;

  static TabularPolicy uniform(std::size_t states, std::size_t actions);
  /// Point mass on `action[s]` in every state.
  static TabularPolicy deterministic(std::size_t actions, const std::vector<std::size_t>& action);

  double operator()(std::size_t s, std::size_t a) const { return prob[s * action_count + a]; }
  double& operator()(std::size_t s, std::size_t a) { return prob[s * action_count + a]; }
  std::span<const double> row(std::size_t s) const {
    return std::span<const double>(prob).subspan(s * action_count, action_count);
  }
  std::span<double> row(std::size_t s) { return std::span<double>(prob).subspan(s * action_count, action_count); }

  /// Throws UsageError unless every row is nonnegative and sums to 1 within 1e-12.
  void validate() const;
};

struct QTable {
  std::size_t state_count = 0;
  std::size_t action_count = 0;
  std::vector<double> q;

  double operator()(std::size_t s, std::size_t a) const { return q[s * action_count + a]; }
  double& operator()(std::size_t s, std::size_t a) { return q[s * action_count + a]; }
  std::span<const double> row(std::size_t s) const {
    return std::span<const double>(q).subspan(s * action_count, action_count);
  }
};

struct Evaluation {
  QTable q;
  std::vector<double> v;
  /// Sup-norm Bellman expectation residual of q.
  double residual = 0.0;
};

/// Solves (I - gamma P_pi) V = r_pi directly, then Q = r + gamma P V.
/// Throws UsageError for gamma outside (0, 1) or an invalid policy.
Evaluation policy_evaluation(const envs::MdpSpec& mdp, const TabularPolicy& pi);

struct ValueIterationResult {
  QTable q;
  std::vector<double> v;
  TabularPolicy greedy;
  double residual = 0.0;
  int iterations = 0;
};

/// Iterates the Bellman optimality operator until the sup-norm residual is
/// at most `tol`. Greedy ties go to the lowest action index.
ValueIterationResult value_iteration(const envs::MdpSpec& mdp, double tol, int max_iterations = 100000);

/// Shannon entropy (nats) of softmax(q / mu).
double softmax_entropy(std::span<const double> q, double mu);

/// Temperature mu > 0 with entropy(softmax(q / mu)) = target, by monotone
/// bisection on log(mu). The entropy is increasing in mu for non-constant q
/// and ranges over (log m, log |A|), m being the multiplicity of max(q).
/// Throws DegenerateError for constant q and InfeasibleError when the
/// target is outside that range.
double solve_temperature(std::span<const double> q, double target_entropy);

struct EntropySolution {
  TabularPolicy policy;
  /// Per-state temperature; +infinity where Q is constant across actions
  /// (uniform policy, any temperature is consistent).
  std::vector<double> mu;
  std::vector<double> entropy_target;
  /// Evaluation of `policy` at the last iteration.
  QTable q;
  std::vector<double> v;
  int iterations = 0;
  double last_change = 0.0;
};

struct EntropyOptions {
  double tol = 1e-9;
  int max_iterations = 5000;
};

/// Alternates exact evaluation of pi with the per-state projection
/// pi(.|s) <- softmax(Q_pi(s,.) / mu_s), mu_s = solve_temperature(Q_pi(s,.), C_s),
/// until the sup-norm policy change is at most `tol`. Throws
/// ConvergenceError (with the last change in the message) otherwise.
EntropySolution entropy_constrained_optimal_policy(const envs::MdpSpec& mdp,
                                                   std::span<const double> entropy_floor,
                                                   const EntropyOptions& opts = {});

/// max over (s, a) of |pi(a|s) - softmax(Q_pi(s,.)/mu_s)_a| with Q_pi
/// recomputed from scratch by policy_evaluation.
double softmax_relation_residual(const envs::MdpSpec& mdp, const TabularPolicy& pi,
                                 std::span<const double> mu);

struct OptimalityCertificate {
  bool passed = true;
  /// Largest improvement any sampled deviation achieved, floored at zero.
  double worst_gain = 0.0;
  std::size_t samples_checked = 0;
};

/// Randomized single-state deviation search: for each non-degenerate state,
/// draws `samples` distributions with entropy >= C_s and checks none of them
/// beats pi(.|s) on sum_a p(a) Q(s,a) with Q held fixed (slack `tol`).
OptimalityCertificate certify_local_optimality(const EntropySolution& sol, std::size_t samples,
                                               std::mt19937_64& rng, double tol = 1e-10);

}  // namespace advrl::exact
