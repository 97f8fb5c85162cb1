#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "advrl/envs/mdp_spec.hpp"
#include "advrl/exact/solvers.hpp"
#include "advrl/policy/policy.hpp"

namespace advrl::attacks {

enum class Init { kZero, kUniform };

/// l-infinity budget for PGD.
struct PerturbationBudget {
  double epsilon = 0.0;
  int steps = 7;
  double alpha = 0.0;
  Init init = Init::kUniform;

  /// n = 7, alpha = epsilon / 2, uniform start.
  static PerturbationBudget with_epsilon(double epsilon);
  /// Throws ConfigError for a negative epsilon, steps < 1, or alpha <= 0
  /// while epsilon > 0.
  void validate() const;
};

enum class ObjectiveTag { kCePgd, kMaxPgd, kMinPgd, kCritic, kRandom };

std::string to_string(ObjectiveTag tag);
ObjectiveTag objective_from_string(const std::string& s);

/// Q(s, .) for the state whose clean observation is given.
using QProvider = std::function<std::vector<double>(std::span<const double> clean_obs)>;

/// Looks the state up by its observation in an enumerable MDP.
QProvider table_q_provider(const envs::MdpSpec& mdp, const exact::QTable& q);

struct AttackObjective {
  ObjectiveTag tag = ObjectiveTag::kCePgd;
  /// Required for kCritic. For kMinPgd, if present, selects the target by
  /// lowest Q instead of lowest clean probability.
  QProvider q;
};

struct AttackOutcome {
  std::vector<double> delta;
  /// Objective at x_0 .. x_n (empty for the random tag).
  std::vector<double> objective_trace;
  std::size_t best_iterate = 0;
  policy::ActionDist clean_dist;
  policy::ActionDist perturbed_dist;
  /// Target action of max_pgd / min_pgd.
  std::optional<std::size_t> target_action;

  double best_objective() const;
};

/// Objective evaluated at x (to be maximized). Context (clean distribution,
/// target action, Q row) is derived from clean_obs.
class ObjectiveFunction {
 public:
  ObjectiveFunction(const policy::PolicyNet& policy, std::span<const double> clean_obs,
                    const AttackObjective& objective);

  double value(std::span<const double> x) const;
  /// Value and gradient with respect to x. The clean-policy factor is a constant.
  double value_and_gradient(std::span<const double> x, std::vector<double>& grad) const;

  const policy::ActionDist& clean_dist() const { return clean_; }
  std::optional<std::size_t> target_action() const { return target_; }

 private:
  double from_dist(const policy::ActionDist& d) const;

  const policy::PolicyNet& policy_;
  ObjectiveTag tag_;
  policy::ActionDist clean_;
  std::optional<std::size_t> target_;
  std::vector<double> q_;
};

double ce_objective(const policy::PolicyNet& policy, std::span<const double> clean_obs, std::span<const double> x);
double max_pgd_objective(const policy::PolicyNet& policy, std::span<const double> clean_obs,
                         std::span<const double> x);
double min_pgd_objective(const policy::PolicyNet& policy, std::span<const double> clean_obs,
                         std::span<const double> x);
double critic_objective(const policy::PolicyNet& policy, std::span<const double> q_row, std::span<const double> x);

/// Sign-gradient ascent projected onto the budget ball around obs. Returns
/// the best of x_0 .. x_n by objective value. delta is clamped to
/// [-epsilon, epsilon] exactly; the perturbed observation is obs + delta.
AttackOutcome pgd_attack(const policy::PolicyNet& policy, std::span<const double> obs,
                         const AttackObjective& objective, const PerturbationBudget& budget,
                         std::mt19937_64& rng);

/// Each coordinate uniform on [-epsilon, epsilon].
std::vector<double> random_perturbation(std::span<const double> obs, double epsilon, std::mt19937_64& rng);

struct BruteForceResult {
  std::vector<double> delta;
  double value = 0.0;
  /// Every grid point within `tie_tol` of the maximum.
  std::vector<std::vector<double>> ties;
};

/// Exhaustive search over the axis-aligned grid of the ball with the given
/// pitch (both faces included). Observation dimension must be at most 3.
BruteForceResult brute_force_attack(const policy::PolicyNet& policy, std::span<const double> clean_obs,
                                    const AttackObjective& objective, double epsilon, double grid_pitch,
                                    double tie_tol = 1e-12);

nlohmann::json to_json(const AttackOutcome& outcome, std::span<const double> clean_obs, ObjectiveTag tag,
                       const PerturbationBudget& budget);

}  // namespace advrl::attacks
