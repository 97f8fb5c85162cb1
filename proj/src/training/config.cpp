#include "advrl/training/config.hpp"

#include <cmath>

#include "advrl/errors.hpp"
#include "advrl/io/json_fields.hpp"

namespace advrl::training {

std::string to_string(TrainerTag t) {
  switch (t) {
    case TrainerTag::kStandard: return "standard";
    case TrainerTag::kAtpa: return "atpa";
    case TrainerTag::kStageWise: return "stagewise";
    case TrainerTag::kDataAugment: return "dataaugment";
  }
  return "?";
}

TrainerTag trainer_from_string(const std::string& s) {
  for (auto t : {TrainerTag::kStandard, TrainerTag::kAtpa, TrainerTag::kStageWise, TrainerTag::kDataAugment}) {
    if (to_string(t) == s) return t;
  }
  throw ConfigError("unknown trainer '" + s + "'");
}

std::string to_string(OptimizerTag t) { return t == OptimizerTag::kSgd ? "sgd" : "adam"; }

OptimizerTag optimizer_from_string(const std::string& s) {
  if (s == "sgd") return OptimizerTag::kSgd;
  if (s == "adam") return OptimizerTag::kAdam;
  throw ConfigError("unknown optimizer '" + s + "'");
}

std::int64_t TrainConfig::iterations() const {
  const std::int64_t per = steps_per_iteration();
  return (total_steps + per - 1) / per;
}

void TrainConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw ConfigError(what);
  };
  require(total_steps > 0, "total_steps must be positive");
  require(horizon > 0 && actors > 0 && epochs > 0, "horizon, actors and epochs must be positive");
  require(minibatch > 0 && minibatch <= horizon * actors, "minibatch must be in [1, horizon * actors]");
  require(gamma > 0.0 && gamma < 1.0, "gamma must be in (0, 1)");
  require(gae_lambda >= 0.0 && gae_lambda <= 1.0, "gae_lambda must be in [0, 1]");
  require(clip > 0.0, "clip must be positive");
  require(learning_rate > 0.0, "learning_rate must be positive");
  require(value_coef >= 0.0 && entropy_coef >= 0.0, "loss coefficients must be >= 0");
  require(max_grad_norm > 0.0, "max_grad_norm must be positive");
  require(stagewise_pretrain_fraction > 0.0 && stagewise_pretrain_fraction <= 1.0,
          "stagewise_pretrain_fraction must be in (0, 1]");
  require(dataaugment_phi_max >= 0.0 && dataaugment_phi_max <= 1.0, "dataaugment_phi_max must be in [0, 1]");
  require(kl_diag_states >= 0 && kl_diag_restarts >= 2, "kl diagnostic needs states >= 0 and restarts >= 2");
  require(checkpoint_every >= 0 && workers >= 1, "checkpoint_every >= 0 and workers >= 1 required");
  require(!net.hidden.empty(), "net needs at least one hidden layer");
  budget.validate();
}

attacks::PerturbationBudget parse_budget(const nlohmann::json& j, attacks::PerturbationBudget base) {
  const std::string where = "budget";
  io::reject_unknown_keys(j, {"epsilon", "steps", "alpha", "init"}, where);
  const bool has_alpha = j.contains("alpha");
  io::read_field(j, "epsilon", base.epsilon, where);
  io::read_field(j, "steps", base.steps, where);
  if (has_alpha) {
    io::read_field(j, "alpha", base.alpha, where);
  } else if (j.contains("epsilon")) {
    base.alpha = base.epsilon / 2.0;
  }
  if (j.contains("init")) {
    const auto s = j.at("init").get<std::string>();
    if (s == "zero") {
      base.init = attacks::Init::kZero;
    } else if (s == "uniform") {
      base.init = attacks::Init::kUniform;
    } else {
      throw ConfigError("budget.init must be 'zero' or 'uniform'");
    }
  }
  base.validate();
  return base;
}

nlohmann::json to_json(const attacks::PerturbationBudget& b) {
  return {{"epsilon", b.epsilon},
          {"steps", b.steps},
          {"alpha", b.alpha},
          {"init", b.init == attacks::Init::kZero ? "zero" : "uniform"}};
}

TrainConfig parse_train_config(const nlohmann::json& j, TrainConfig c) {
  const std::string where = "train";
  io::reject_unknown_keys(j,
                          {"trainer", "seed", "total_steps", "horizon", "actors", "epochs", "minibatch", "gamma",
                           "gae_lambda", "clip", "learning_rate", "anneal", "value_coef", "entropy_coef",
                           "max_grad_norm", "normalize_advantages", "optimizer", "adam_beta1", "adam_beta2",
                           "adam_epsilon", "hidden", "activation", "policy_output_gain", "budget",
                           "stagewise_pretrain_fraction", "dataaugment_phi_max", "kl_diag_states",
                           "kl_diag_restarts", "checkpoint_every", "workers"},
                          where);
  if (j.contains("trainer")) c.trainer = trainer_from_string(j.at("trainer").get<std::string>());
  if (j.contains("optimizer")) c.optimizer = optimizer_from_string(j.at("optimizer").get<std::string>());
  if (j.contains("activation")) c.net.activation = diff::activation_from_string(j.at("activation").get<std::string>());
  io::read_field(j, "seed", c.seed, where);
  io::read_field(j, "total_steps", c.total_steps, where);
  io::read_field(j, "horizon", c.horizon, where);
  io::read_field(j, "actors", c.actors, where);
  io::read_field(j, "epochs", c.epochs, where);
  io::read_field(j, "minibatch", c.minibatch, where);
  io::read_field(j, "gamma", c.gamma, where);
  io::read_field(j, "gae_lambda", c.gae_lambda, where);
  io::read_field(j, "clip", c.clip, where);
  io::read_field(j, "learning_rate", c.learning_rate, where);
  io::read_field(j, "anneal", c.anneal, where);
  io::read_field(j, "value_coef", c.value_coef, where);
  io::read_field(j, "entropy_coef", c.entropy_coef, where);
  io::read_field(j, "max_grad_norm", c.max_grad_norm, where);
  io::read_field(j, "normalize_advantages", c.normalize_advantages, where);
  io::read_field(j, "adam_beta1", c.adam_beta1, where);
  io::read_field(j, "adam_beta2", c.adam_beta2, where);
  io::read_field(j, "adam_epsilon", c.adam_epsilon, where);
  io::read_field(j, "hidden", c.net.hidden, where);
  io::read_field(j, "policy_output_gain", c.policy_output_gain, where);
  io::read_field(j, "stagewise_pretrain_fraction", c.stagewise_pretrain_fraction, where);
  io::read_field(j, "dataaugment_phi_max", c.dataaugment_phi_max, where);
  io::read_field(j, "kl_diag_states", c.kl_diag_states, where);
  io::read_field(j, "kl_diag_restarts", c.kl_diag_restarts, where);
  io::read_field(j, "checkpoint_every", c.checkpoint_every, where);
  io::read_field(j, "workers", c.workers, where);
  if (j.contains("budget")) c.budget = parse_budget(j.at("budget"), c.budget);
  c.validate();
  return c;
}

nlohmann::json to_json(const TrainConfig& c) {
  return {{"trainer", to_string(c.trainer)},
          {"seed", c.seed},
          {"total_steps", c.total_steps},
          {"horizon", c.horizon},
          {"actors", c.actors},
          {"epochs", c.epochs},
          {"minibatch", c.minibatch},
          {"gamma", c.gamma},
          {"gae_lambda", c.gae_lambda},
          {"clip", c.clip},
          {"learning_rate", c.learning_rate},
          {"anneal", c.anneal},
          {"value_coef", c.value_coef},
          {"entropy_coef", c.entropy_coef},
          {"max_grad_norm", c.max_grad_norm},
          {"normalize_advantages", c.normalize_advantages},
          {"optimizer", to_string(c.optimizer)},
          {"adam_beta1", c.adam_beta1},
          {"adam_beta2", c.adam_beta2},
          {"adam_epsilon", c.adam_epsilon},
          {"hidden", c.net.hidden},
          {"activation", diff::to_string(c.net.activation)},
          {"policy_output_gain", c.policy_output_gain},
          {"budget", to_json(c.budget)},
          {"stagewise_pretrain_fraction", c.stagewise_pretrain_fraction},
          {"dataaugment_phi_max", c.dataaugment_phi_max},
          {"kl_diag_states", c.kl_diag_states},
          {"kl_diag_restarts", c.kl_diag_restarts},
          {"checkpoint_every", c.checkpoint_every},
          {"workers", c.workers}};
}

}  // namespace advrl::training
