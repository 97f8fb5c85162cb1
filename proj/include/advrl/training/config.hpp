#pragma once

#include <cstdint>
#include <string>

#include <nlohmann/json.hpp>

#include "advrl/attacks/attacks.hpp"
#include "advrl/policy/policy.hpp"

namespace advrl::training {

enum class TrainerTag { kStandard, kAtpa, kStageWise, kDataAugment };
enum class OptimizerTag { kSgd, kAdam };

std::string to_string(TrainerTag t);
TrainerTag trainer_from_string(const std::string& s);
std::string to_string(OptimizerTag t);
OptimizerTag optimizer_from_string(const std::string& s);

struct TrainConfig {
  TrainerTag trainer = TrainerTag::kStandard;
  std::uint64_t seed = 0;
  std::int64_t total_steps = 200000;

  int horizon = 128;  // T, steps per actor per iteration
  int actors = 4;     // N
  int epochs = 4;
  int minibatch = 128;
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double clip = 0.1;
  double learning_rate = 2.5e-4;
  /// Multiply learning rate and clip by beta = 1 - step / total_steps.
  bool anneal = true;
  double value_coef = 0.5;
  double entropy_coef = 0.0;
  double max_grad_norm = 0.5;
  bool normalize_advantages = true;
  OptimizerTag optimizer = OptimizerTag::kAdam;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-5;

  policy::NetShape net;
  double policy_output_gain = 0.01;

  /// Training-time attack (ATPA, StageWise, DataAugment). Always CE_PGD.
  attacks::PerturbationBudget budget = attacks::PerturbationBudget::with_epsilon(0.05);
  double stagewise_pretrain_fraction = 1.0 / 3.0;
  double dataaugment_phi_max = 0.5;

  /// PGD restarts and sampled states for the per-iteration max-KL diagnostic.
  int kl_diag_states = 4;
  int kl_diag_restarts = 4;

  /// Iterations between checkpoints (0: final only).
  int checkpoint_every = 0;
  /// Threads used for actor collection. Results do not depend on it.
  int workers = 1;

  std::int64_t steps_per_iteration() const { return static_cast<std::int64_t>(horizon) * actors; }
  std::int64_t iterations() const;
  /// Throws ConfigError on any out-of-range field.
  void validate() const;
};

/// Merges `j` over `base`. Unknown keys are a ConfigError.
TrainConfig parse_train_config(const nlohmann::json& j, TrainConfig base = {});
nlohmann::json to_json(const TrainConfig& c);

/// Parses a budget block {epsilon, steps, alpha, init}. alpha defaults to
/// epsilon / 2 when omitted.
attacks::PerturbationBudget parse_budget(const nlohmann::json& j, attacks::PerturbationBudget base);
nlohmann::json to_json(const attacks::PerturbationBudget& b);

}  // namespace advrl::training
