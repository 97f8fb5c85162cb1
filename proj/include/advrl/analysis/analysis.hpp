#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "advrl/attacks/attacks.hpp"
#include "advrl/envs/environment.hpp"
#include "advrl/policy/policy.hpp"

namespace advrl::analysis {

/// Test-time attack applied at every state. An empty `attacker` means none.
struct EvalProtocol {
  int env_seeds = 5;          // E per model
  int episodes_per_seed = 20;  // K
  std::optional<attacks::ObjectiveTag> attacker;
  attacks::QProvider q;  // critic objective only
  attacks::PerturbationBudget budget = attacks::PerturbationBudget::with_epsilon(0.05);
  /// Act greedily instead of sampling.
  bool greedy = false;
  std::uint64_t seed = 0;
  int workers = 1;

  void validate() const;
};

struct ReturnStats {
  double mean = 0.0;
  /// Population standard deviation.
  double stddev = 0.0;
  /// Undiscounted episode returns, ordered by (model, env seed, episode).
  std::vector<double> returns;

  static ReturnStats from_returns(std::vector<double> returns);
};

/// Runs models.size() x E x K episodes. Pure function of its arguments.
ReturnStats evaluate(const std::vector<policy::PolicyNet>& models, const envs::Environment& env,
                     const EvalProtocol& protocol);

/// One episode; the attack (if any) is recomputed at every state.
double run_episode(const policy::PolicyNet& pol, envs::Environment& env, std::uint64_t reset_seed,
                   const EvalProtocol& protocol, std::mt19937_64& action_rng, std::mt19937_64& attack_rng);

struct SweepRow {
  double epsilon = 0.0;
  ReturnStats stats;
};

/// CE_PGD evaluation per epsilon (alpha = epsilon / 2, other budget fields
/// from the protocol). Epsilons must be ascending.
std::vector<SweepRow> epsilon_sweep(const std::vector<policy::PolicyNet>& models, const envs::Environment& env,
                                    const std::vector<double>& epsilons, EvalProtocol protocol);

struct KlLandscape {
  /// Max over the R * (R - 1) ordered pairs of distinct restarts (the R
  /// diagonal pairs are zero).
  std::vector<double> per_state_max;
  int restarts = 0;
  int steps = 0;

  double median() const;
  /// (lower edge, count) pairs over [0, max] with `bins` equal bins.
  std::vector<std::pair<double, std::size_t>> histogram(std::size_t bins) const;
};

/// CE_PGD from R uniform random starts per state. Throws UsageError for R < 2.
KlLandscape kl_landscape(const policy::PolicyNet& pol, const std::vector<std::vector<double>>& states, int restarts,
                         attacks::PerturbationBudget budget, std::uint64_t seed);

/// Clean observations from no-attack rollouts of `pol`, `count` of them
/// drawn uniformly without replacement from the visited pool.
std::vector<std::vector<double>> sample_states(const policy::PolicyNet& pol, const envs::Environment& env,
                                               std::size_t count, std::uint64_t seed);

/// Per-state attack records (see attacks::to_json).
nlohmann::json perturbation_dump(const policy::PolicyNet& pol, const std::vector<std::vector<double>>& states,
                                 const attacks::AttackObjective& objective, const attacks::PerturbationBudget& budget,
                                 std::uint64_t seed);

/// Spearman rank correlation with average ranks for ties.
double spearman(const std::vector<double>& x, const std::vector<double>& y);

struct ReturnRow {
  std::string trainer;
  std::string attacker;
  double epsilon = 0.0;
  int model = 0;
  int env_seed = 0;
  int episode = 0;
  double value = 0.0;
};

/// Expands stats into long-form rows in (model, env seed, episode) order.
std::vector<ReturnRow> to_rows(const ReturnStats& stats, const std::string& trainer, const std::string& attacker,
                               double epsilon, int env_seeds, int episodes_per_seed);
void write_returns_csv(std::ostream& out, const std::vector<ReturnRow>& rows);

}  // namespace advrl::analysis
