#include "advrl/exact/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/Dense>

#include "advrl/diff/kernels.hpp"
#include "advrl/errors.hpp"

namespace advrl::exact {

using envs::MdpSpec;

TabularPolicy TabularPolicy::uniform(std::size_t states, std::size_t actions) {
  return TabularPolicy{states, actions,
                       std::vector<double>(states * actions, 1.0 / static_cast<double>(actions))};
}

TabularPolicy TabularPolicy::deterministic(std::size_t actions, const std::vector<std::size_t>& action) {
  TabularPolicy p{action.size(), actions, std::vector<double>(action.size() * actions, 0.0)};
  for (std::size_t s = 0; s < action.size(); ++s) p(s, action[s]) = 1.0;
  return p;
}

void TabularPolicy::validate() const {
  if (prob.size() != state_count * action_count) throw UsageError("policy table has the wrong size");
  for (std::size_t s = 0; s < state_count; ++s) {
    double total = 0.0;
    for (double v : row(s)) {
      if (!(v >= 0.0)) throw UsageError("policy row " + std::to_string(s) + " has a negative entry");
      total += v;
    }
    if (std::abs(total - 1.0) > 1e-12) {
      throw UsageError("policy row " + std::to_string(s) + " sums to " + std::to_string(total));
    }
  }
}

namespace {

void check_compatible(const MdpSpec& mdp, const TabularPolicy& pi) {
  if (!(mdp.gamma > 0.0 && mdp.gamma < 1.0)) {
    throw UsageError("policy evaluation needs a discount in (0, 1), got " + std::to_string(mdp.gamma));
  }
  if (pi.state_count != mdp.state_count || pi.action_count != mdp.action_count) {
    throw UsageError("policy shape does not match the MDP");
  }
  pi.validate();
}

QTable backup(const MdpSpec& mdp, const std::vector<double>& v) {
  const std::size_t n = mdp.state_count, k = mdp.action_count;
  QTable q{n, k, std::vector<double>(n * k)};
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t a = 0; a < k; ++a) {
      double ev = 0.0;
      for (std::size_t t = 0; t < n; ++t) ev += mdp.p(s, a, t) * v[t];
      q(s, a) = mdp.r(s, a) + mdp.gamma * ev;
    }
  }
  return q;
}

std::vector<double> expectation(const QTable& q, const TabularPolicy& pi) {
  std::vector<double> v(q.state_count, 0.0);
  for (std::size_t s = 0; s < q.state_count; ++s) {
    for (std::size_t a = 0; a < q.action_count; ++a) v[s] += pi(s, a) * q(s, a);
  }
  return v;
}

double sup_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

bool is_constant(std::span<const double> q) {
  const auto [lo, hi] = std::minmax_element(q.begin(), q.end());
  return *hi - *lo <= 1e-12 * std::max(1.0, std::max(std::abs(*hi), std::abs(*lo)));
}

}  // namespace

Evaluation policy_evaluation(const MdpSpec& mdp, const TabularPolicy& pi) {
  check_compatible(mdp, pi);
  const std::size_t n = mdp.state_count, k = mdp.action_count;
  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  Eigen::VectorXd r = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  for (std::size_t s = 0; s < n; ++s) {
    const auto si = static_cast<Eigen::Index>(s);
    for (std::size_t act = 0; act < k; ++act) {
      const double w = pi(s, act);
      if (w == 0.0) continue;
      r(si) += w * mdp.r(s, act);
      for (std::size_t t = 0; t < n; ++t) {
        a(si, static_cast<Eigen::Index>(t)) -= mdp.gamma * w * mdp.p(s, act, t);
      }
    }
  }
  const Eigen::PartialPivLU<Eigen::MatrixXd> lu(a);
  Eigen::VectorXd x = lu.solve(r);
  // One step of iterative refinement tightens the residual to rounding level.
  x += lu.solve(r - a * x);

  Evaluation out;
  out.v.assign(x.data(), x.data() + n);
  out.q = backup(mdp, out.v);
  // Report V as the policy expectation of Q so that V = sum_a pi Q holds tightly.
  const auto v_from_q = expectation(out.q, pi);
  const QTable again = backup(mdp, v_from_q);
  out.residual = sup_diff(std::span<const double>(again.q), out.q.q);
  out.v = v_from_q;
  return out;
}

ValueIterationResult value_iteration(const MdpSpec& mdp, double tol, int max_iterations) {
  if (!(tol > 0.0)) throw UsageError("value iteration tolerance must be positive");
  if (!(mdp.gamma > 0.0 && mdp.gamma < 1.0)) throw UsageError("value iteration needs a discount in (0, 1)");
  const std::size_t n = mdp.state_count, k = mdp.action_count;
  std::vector<double> v(n, 0.0);
  ValueIterationResult out;
  for (int it = 1; it <= max_iterations; ++it) {
    QTable q = backup(mdp, v);
    std::vector<double> next(n);
    for (std::size_t s = 0; s < n; ++s) {
      const auto row = q.row(s);
      next[s] = *std::max_element(row.begin(), row.end());
    }
    const double residual = sup_diff(next, v);
    v = std::move(next);
    out.iterations = it;
    if (residual <= tol) {
      out.q = backup(mdp, v);
      out.residual = 0.0;
      for (std::size_t s = 0; s < n; ++s) {
        const auto row = out.q.row(s);
        out.residual = std::max(out.residual, std::abs(*std::max_element(row.begin(), row.end()) - v[s]));
      }
      break;
    }
    if (it == max_iterations) throw ConvergenceError("value iteration did not reach the tolerance");
  }
  out.v = v;
  std::vector<std::size_t> best(n);
  for (std::size_t s = 0; s < n; ++s) {
    const auto row = out.q.row(s);
    best[s] = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  out.greedy = TabularPolicy::deterministic(k, best);
  return out;
}

double softmax_entropy(std::span<const double> q, double mu) {
  std::vector<double> z(q.size()), logp(q.size());
  for (std::size_t i = 0; i < q.size(); ++i) z[i] = q[i] / mu;
  diff::kernels::log_softmax(z, logp);
  double h = 0.0;
  for (double lp : logp) {
    const double p = std::exp(lp);
    if (p > 0.0) h -= p * lp;
  }
  return h;
}

double solve_temperature(std::span<const double> q, double target) {
  if (q.size() < 2) throw DegenerateError("temperature is undefined for fewer than two actions");
  if (is_constant(q)) {
    throw DegenerateError("action values are constant: every temperature gives the uniform policy");
  }
  const double qmax = *std::max_element(q.begin(), q.end());
  const double qmin = *std::min_element(q.begin(), q.end());
  const auto ties = std::count(q.begin(), q.end(), qmax);
  const double h_min = std::log(static_cast<double>(ties));
  const double h_max = std::log(static_cast<double>(q.size()));
  if (!(target > h_min && target < h_max)) {
    std::ostringstream msg;
    msg << "entropy target " << target << " outside the attainable range (" << h_min << ", " << h_max << ")";
    throw InfeasibleError(msg.str());
  }
  // Bracket in log-temperature, then bisect.
  const double spread = qmax - qmin;
  double lo = std::log(spread), hi = lo;
  while (softmax_entropy(q, std::exp(lo)) > target) lo -= 1.0;
  while (softmax_entropy(q, std::exp(hi)) < target) {
    hi += 1.0;
    if (hi > 700.0) break;
  }
  double mid = 0.5 * (lo + hi);
  for (int it = 0; it < 400; ++it) {
    mid = 0.5 * (lo + hi);
    const double h = softmax_entropy(q, std::exp(mid));
    if (h == target) break;
    (h < target ? lo : hi) = mid;
    if (hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(mid))) break;
  }
  return std::exp(mid);
}

namespace {

void project_row(std::span<const double> q, double mu, std::span<double> out) {
  std::vector<double> z(q.size());
  for (std::size_t i = 0; i < q.size(); ++i) z[i] = q[i] / mu;
  diff::kernels::softmax(z, out);
}

}  // namespace

EntropySolution entropy_constrained_optimal_policy(const MdpSpec& mdp, std::span<const double> floor,
                                                   const EntropyOptions& opts) {
  const std::size_t n = mdp.state_count, k = mdp.action_count;
  if (floor.size() != n) throw UsageError("need one entropy floor per state");
  for (double c : floor) {
    if (!(c > 0.0 && c < std::log(static_cast<double>(k)))) {
      throw InfeasibleError("entropy floor must lie in (0, log|A|)");
    }
  }
  EntropySolution sol;
  sol.policy = TabularPolicy::uniform(n, k);
  sol.mu.assign(n, std::numeric_limits<double>::infinity());
  sol.entropy_target.assign(floor.begin(), floor.end());

  for (int it = 1; it <= opts.max_iterations; ++it) {
    const Evaluation ev = policy_evaluation(mdp, sol.policy);
    TabularPolicy next = sol.policy;
    for (std::size_t s = 0; s < n; ++s) {
      const auto qrow = ev.q.row(s);
      if (is_constant(qrow)) {
        sol.mu[s] = std::numeric_limits<double>::infinity();
        std::fill(next.row(s).begin(), next.row(s).end(), 1.0 / static_cast<double>(k));
        continue;
      }
      sol.mu[s] = solve_temperature(qrow, floor[s]);
      project_row(qrow, sol.mu[s], next.row(s));
    }
    sol.last_change = sup_diff(next.prob, sol.policy.prob);
    sol.policy = std::move(next);
    sol.iterations = it;
    sol.q = ev.q;
    sol.v = ev.v;
    if (sol.last_change <= opts.tol) {
      const Evaluation final_ev = policy_evaluation(mdp, sol.policy);
      sol.q = final_ev.q;
      sol.v = final_ev.v;
      return sol;
    }
  }
  std::ostringstream msg;
  msg << "entropy-constrained fixed point did not converge in " << opts.max_iterations
      << " iterations (last policy change " << sol.last_change << ")";
  throw ConvergenceError(msg.str());
}

double softmax_relation_residual(const MdpSpec& mdp, const TabularPolicy& pi, std::span<const double> mu) {
  const Evaluation ev = policy_evaluation(mdp, pi);
  double worst = 0.0;
  std::vector<double> target(pi.action_count);
  for (std::size_t s = 0; s < pi.state_count; ++s) {
    if (std::isinf(mu[s])) {
      std::fill(target.begin(), target.end(), 1.0 / static_cast<double>(pi.action_count));
    } else {
      project_row(ev.q.row(s), mu[s], target);
    }
    worst = std::max(worst, sup_diff(pi.row(s), target));
  }
  return worst;
}

OptimalityCertificate certify_local_optimality(const EntropySolution& sol, std::size_t samples,
                                               std::mt19937_64& rng, double tol) {
  OptimalityCertificate cert;
  const std::size_t n = sol.policy.state_count, k = sol.policy.action_count;
  std::gamma_distribution<double> g(1.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> p(k);
  for (std::size_t s = 0; s < n; ++s) {
    if (std::isinf(sol.mu[s])) continue;
    const auto qrow = sol.q.row(s);
    double base = 0.0;
    for (std::size_t a = 0; a < k; ++a) base += sol.policy(s, a) * qrow[a];
    std::size_t drawn = 0;
    while (drawn < samples) {
      // Dirichlet(1) draw mixed toward uniform; keep it only if feasible.
      double total = 0.0;
      for (double& v : p) total += (v = g(rng));
      const double mix = u(rng);
      double h = 0.0, value = 0.0;
      for (std::size_t a = 0; a < k; ++a) {
        p[a] = mix * p[a] / total + (1.0 - mix) / static_cast<double>(k);
        if (p[a] > 0.0) h -= p[a] * std::log(p[a]);
        value += p[a] * qrow[a];
      }
      if (h < sol.entropy_target[s]) continue;
      ++drawn;
      ++cert.samples_checked;
      cert.worst_gain = std::max(cert.worst_gain, value - base);
      if (value > base + tol) cert.passed = false;
    }
  }
  return cert;
}

}  // namespace advrl::exact
