#include "advrl/attacks/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "advrl/errors.hpp"

namespace advrl::attacks {

namespace {

using policy::ActionDist;
using policy::PolicyNet;

double sign(double g) { return g > 0.0 ? 1.0 : (g < 0.0 ? -1.0 : 0.0); }

std::size_t argmin(std::span<const double> v) {
  return static_cast<std::size_t>(std::min_element(v.begin(), v.end()) - v.begin());
}

}  // namespace

PerturbationBudget PerturbationBudget::with_epsilon(double epsilon) {
  PerturbationBudget b;
  b.epsilon = epsilon;
  b.alpha = epsilon / 2.0;
  return b;
}

void PerturbationBudget::validate() const {
  if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) throw ConfigError("epsilon must be finite and >= 0");
  if (steps < 1) throw ConfigError("PGD needs at least one step");
  if (epsilon > 0.0 && !(alpha > 0.0)) throw ConfigError("PGD step size alpha must be > 0");
}

std::string to_string(ObjectiveTag tag) {
  switch (tag) {
    case ObjectiveTag::kCePgd: return "ce_pgd";
    case ObjectiveTag::kMaxPgd: return "max_pgd";
    case ObjectiveTag::kMinPgd: return "min_pgd";
    case ObjectiveTag::kCritic: return "critic";
    case ObjectiveTag::kRandom: return "random";
  }
  return "?";
}

ObjectiveTag objective_from_string(const std::string& s) {
  for (auto t : {ObjectiveTag::kCePgd, ObjectiveTag::kMaxPgd, ObjectiveTag::kMinPgd, ObjectiveTag::kCritic,
                 ObjectiveTag::kRandom}) {
    if (to_string(t) == s) return t;
  }
  throw ConfigError("unknown attack objective '" + s + "'");
}

QProvider table_q_provider(const envs::MdpSpec& mdp, const exact::QTable& q) {
  return [observation = mdp.observation, q](std::span<const double> obs) {
    const auto it = std::find_if(observation.begin(), observation.end(), [&](const std::vector<double>& o) {
      return std::equal(o.begin(), o.end(), obs.begin(), obs.end());
    });
    if (it == observation.end()) throw UsageError("observation does not match any enumerated state");
    const auto row = q.row(static_cast<std::size_t>(it - observation.begin()));
    return std::vector<double>(row.begin(), row.end());
  };
}

double AttackOutcome::best_objective() const {
  return objective_trace.empty() ? 0.0 : objective_trace[best_iterate];
}

ObjectiveFunction::ObjectiveFunction(const PolicyNet& policy, std::span<const double> clean_obs,
                                     const AttackObjective& objective)
    : policy_(policy), tag_(objective.tag), clean_(policy::dist(policy, clean_obs)) {
  switch (tag_) {
    case ObjectiveTag::kCritic:
      if (!objective.q) throw ConfigError("the critic objective needs a Q provider");
      q_ = objective.q(clean_obs);
      if (q_.size() != clean_.size()) throw ShapeError("Q row size does not match the action count");
      break;
    case ObjectiveTag::kMaxPgd:
      target_ = clean_.argmax();
      break;
    case ObjectiveTag::kMinPgd:
      if (objective.q) {
        q_ = objective.q(clean_obs);
        target_ = argmin(q_);
      } else {
        target_ = clean_.argmin();
      }
      break;
    default:
      break;
  }
}

double ObjectiveFunction::from_dist(const ActionDist& d) const {
  switch (tag_) {
    case ObjectiveTag::kCePgd: return policy::cross_entropy(d, clean_);
    case ObjectiveTag::kMaxPgd: return -d.log_probabilities[*target_];
    case ObjectiveTag::kMinPgd: return d.log_probabilities[*target_];
    case ObjectiveTag::kCritic: {
      double e = 0.0;
      for (std::size_t a = 0; a < d.size(); ++a) e += d.probabilities[a] * q_[a];
      return -e;
    }
    case ObjectiveTag::kRandom: break;
  }
  throw UsageError("the random attack has no objective");
}

double ObjectiveFunction::value(std::span<const double> x) const { return from_dist(policy::dist(policy_, x)); }

double ObjectiveFunction::value_and_gradient(std::span<const double> x, std::vector<double>& grad) const {
  if (tag_ == ObjectiveTag::kRandom) throw UsageError("the random attack has no objective");
  if (x.size() != policy_.observation_dim()) throw ShapeError("attack input does not match the policy");
  diff::Tape tape;
  const auto vars = diff::bind_mlp(tape, policy_.mlp, false);
  const auto xv = tape.variable(diff::Tensor::vector(std::vector<double>(x.begin(), x.end())));
  const auto logits = diff::forward_mlp(policy_.mlp, vars, xv);
  diff::Var loss;
  switch (tag_) {
    case ObjectiveTag::kCePgd:
      loss = -diff::dot(diff::softmax(logits), tape.constant(diff::Tensor::vector(clean_.log_probabilities)));
      break;
    case ObjectiveTag::kMaxPgd: {
      const std::size_t idx[] = {*target_};
      loss = -diff::sum(diff::pick(diff::log_softmax(logits), idx));
      break;
    }
    case ObjectiveTag::kMinPgd: {
      const std::size_t idx[] = {*target_};
      loss = diff::sum(diff::pick(diff::log_softmax(logits), idx));
      break;
    }
    case ObjectiveTag::kCritic:
      loss = -diff::dot(diff::softmax(logits), tape.constant(diff::Tensor::vector(q_)));
      break;
    case ObjectiveTag::kRandom: break;
  }
  tape.backward(loss);
  const auto& g = tape.grad(xv).data();
  grad.assign(g.begin(), g.end());
  return loss.value().item();
}

double ce_objective(const PolicyNet& policy, std::span<const double> clean_obs, std::span<const double> x) {
  return ObjectiveFunction(policy, clean_obs, {ObjectiveTag::kCePgd, {}}).value(x);
}

double max_pgd_objective(const PolicyNet& policy, std::span<const double> clean_obs, std::span<const double> x) {
  return ObjectiveFunction(policy, clean_obs, {ObjectiveTag::kMaxPgd, {}}).value(x);
}

double min_pgd_objective(const PolicyNet& policy, std::span<const double> clean_obs, std::span<const double> x) {
  return ObjectiveFunction(policy, clean_obs, {ObjectiveTag::kMinPgd, {}}).value(x);
}

double critic_objective(const PolicyNet& policy, std::span<const double> q_row, std::span<const double> x) {
  std::vector<double> q(q_row.begin(), q_row.end());
  AttackObjective obj{ObjectiveTag::kCritic, [q](std::span<const double>) { return q; }};
  return ObjectiveFunction(policy, x, obj).value(x);
}

std::vector<double> random_perturbation(std::span<const double> obs, double epsilon, std::mt19937_64& rng) {
  std::vector<double> delta(obs.size(), 0.0);
  if (epsilon == 0.0) return delta;
  std::uniform_real_distribution<double> u(-epsilon, epsilon);
  for (double& d : delta) d = u(rng);
  return delta;
}

AttackOutcome pgd_attack(const PolicyNet& policy, std::span<const double> obs, const AttackObjective& objective,
                         const PerturbationBudget& budget, std::mt19937_64& rng) {
  budget.validate();
  for (double v : obs) {
    if (!std::isfinite(v)) throw NumericError("attack on a non-finite observation");
  }
  const double eps = budget.epsilon;
  const std::size_t dim = obs.size();
  auto perturbed = [&](const std::vector<double>& delta) {
    std::vector<double> x(dim);
    for (std::size_t i = 0; i < dim; ++i) x[i] = obs[i] + delta[i];
    return x;
  };

  AttackOutcome out;
  if (objective.tag == ObjectiveTag::kRandom) {
    out.clean_dist = policy::dist(policy, obs);
    out.delta = random_perturbation(obs, eps, rng);
    out.perturbed_dist = policy::dist(policy, perturbed(out.delta));
    return out;
  }

  const ObjectiveFunction f(policy, obs, objective);
  out.clean_dist = f.clean_dist();
  out.target_action = f.target_action();

  std::vector<double> delta(dim, 0.0);
  if (budget.init == Init::kUniform) delta = random_perturbation(obs, eps, rng);
  std::vector<double> best = delta, grad;
  double best_value = -std::numeric_limits<double>::infinity();
  for (int i = 0;; ++i) {
    const double v = f.value_and_gradient(perturbed(delta), grad);
    out.objective_trace.push_back(v);
    if (v > best_value) {
      best_value = v;
      best = delta;
      out.best_iterate = static_cast<std::size_t>(i);
    }
    if (i == budget.steps || eps == 0.0) break;
    for (std::size_t k = 0; k < dim; ++k) {
      delta[k] = std::clamp(delta[k] + budget.alpha * sign(grad[k]), -eps, eps);
    }
  }
  out.delta = std::move(best);
  out.perturbed_dist = policy::dist(policy, perturbed(out.delta));
  return out;
}

BruteForceResult brute_force_attack(const PolicyNet& policy, std::span<const double> clean_obs,
                                    const AttackObjective& objective, double epsilon, double grid_pitch,
                                    double tie_tol) {
  const std::size_t dim = clean_obs.size();
  if (dim == 0 || dim > 3) throw UsageError("brute force attack supports 1 to 3 observation dimensions");
  if (!(grid_pitch > 0.0)) throw UsageError("grid pitch must be positive");
  if (!(epsilon >= 0.0)) throw UsageError("epsilon must be >= 0");
  if (objective.tag == ObjectiveTag::kRandom) throw UsageError("the random attack has no objective");

  std::vector<double> axis{0.0};
  if (epsilon > 0.0) {
    const auto m = static_cast<std::size_t>(std::ceil(2.0 * epsilon / grid_pitch - 1e-9));
    axis.resize(m + 1);
    for (std::size_t i = 0; i <= m; ++i) {
      axis[i] = std::clamp(-epsilon + 2.0 * epsilon * static_cast<double>(i) / static_cast<double>(m), -epsilon,
                           epsilon);
    }
    axis.back() = epsilon;
  }

  const ObjectiveFunction f(policy, clean_obs, objective);
  std::size_t total = 1;
  for (std::size_t d = 0; d < dim; ++d) total *= axis.size();
  std::vector<std::vector<double>> points(total, std::vector<double>(dim));
  std::vector<double> values(total);
  std::vector<double> x(dim);
  for (std::size_t idx = 0; idx < total; ++idx) {
    std::size_t rest = idx;
    for (std::size_t d = 0; d < dim; ++d) {
      points[idx][d] = axis[rest % axis.size()];
      rest /= axis.size();
      x[d] = clean_obs[d] + points[idx][d];
    }
    values[idx] = f.value(x);
  }
  const std::size_t best = static_cast<std::size_t>(std::max_element(values.begin(), values.end()) - values.begin());
  BruteForceResult r;
  r.delta = points[best];
  r.value = values[best];
  const double slack = tie_tol * std::max(1.0, std::abs(r.value));
  for (std::size_t idx = 0; idx < total; ++idx) {
    if (values[idx] >= r.value - slack) r.ties.push_back(points[idx]);
  }
  return r;
}

nlohmann::json to_json(const AttackOutcome& outcome, std::span<const double> clean_obs, ObjectiveTag tag,
                       const PerturbationBudget& budget) {
  nlohmann::json j;
  j["objective"] = to_string(tag);
  j["epsilon"] = budget.epsilon;
  j["steps"] = budget.steps;
  j["alpha"] = budget.alpha;
  j["clean_obs"] = std::vector<double>(clean_obs.begin(), clean_obs.end());
  j["delta"] = outcome.delta;
  j["clean_dist"] = outcome.clean_dist.probabilities;
  j["perturbed_dist"] = outcome.perturbed_dist.probabilities;
  j["objective_trace"] = outcome.objective_trace;
  j["best_iterate"] = outcome.best_iterate;
  j["target_action"] = outcome.target_action ? nlohmann::json(*outcome.target_action) : nlohmann::json(nullptr);
  return j;
}

}  // namespace advrl::attacks
