#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "advrl/envs/environment.hpp"
#include "advrl/io/checkpoint.hpp"
#include "advrl/training/config.hpp"
#include "advrl/training/ppo.hpp"

namespace advrl::training {

/// Independent 64-bit seed for (seed, stream, index) via splitmix64.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index);

/// (1 - step / total) * base, floored at zero.
double anneal(double base, std::int64_t step, std::int64_t total);

struct IterationMetrics {
  std::int64_t iteration = 0;
  /// Environment steps completed after this iteration.
  std::int64_t step = 0;
  int episodes = 0;
  /// Mean undiscounted return of episodes that ended in this iteration (NaN if none).
  double mean_return = 0.0;
  double value_loss = 0.0;
  double surrogate = 0.0;
  double approx_kl = 0.0;
  double clip_fraction = 0.0;
  double entropy = 0.0;
  /// Largest ordered-pair KL among PGD restarts on sampled batch states, at
  /// the attack radius used in this iteration (0 when nothing was attacked).
  double restart_max_kl = 0.0;
  double learning_rate = 0.0;
  double clip = 0.0;
  /// Share of collected steps perturbed with a positive radius.
  double attacked_fraction = 0.0;
};

void write_metrics_header(std::ostream& out);
void write_metrics_row(std::ostream& out, const IterationMetrics& m);

struct EpisodeRecord {
  std::int64_t step = 0;  // global step at which the episode ended
  int actor = 0;
  double total_return = 0.0;
  int length = 0;
};

/// PPO driver shared by all four trainers; the tag only changes which
/// rollout steps are attacked.
class Trainer {
 public:
  Trainer(const envs::Environment& prototype, TrainConfig cfg);

  bool finished() const { return step_ >= cfg_.total_steps; }
  /// Collects N x T steps, then runs the PPO update.
  const IterationMetrics& iterate();
  /// Iterates to completion. When `checkpoint_dir` is non-empty, writes
  /// ckpt_<step>.bin every cfg.checkpoint_every iterations and at the end.
  void run(const std::string& checkpoint_dir = "",
           const std::function<void(const Trainer&, const IterationMetrics&)>& on_iteration = {});

  io::Checkpoint checkpoint() const;
  void save(const std::string& path) const;
  /// Restores a trainer saved by save(). The config must match the original run.
  static Trainer resume(const std::string& path, const envs::Environment& prototype, TrainConfig cfg);

  const TrainConfig& config() const { return cfg_; }
  const policy::PolicyNet& policy() const { return policy_; }
  const policy::ValueNet& value() const { return value_; }
  std::int64_t step() const { return step_; }
  std::int64_t iteration() const { return iteration_; }
  const std::vector<IterationMetrics>& metrics() const { return metrics_; }
  const std::vector<EpisodeRecord>& episodes() const { return episodes_; }
  /// The last collected batch (one trajectory per actor).
  const std::vector<Trajectory>& last_batch() const { return batch_; }
  /// First global step that may be attacked; nullopt for the standard trainer.
  std::optional<std::int64_t> attack_start_step() const;
  /// Current DataAugment perturbation probability at global step g.
  double perturbation_probability(std::int64_t global_step) const;

 private:
  struct Actor {
    std::unique_ptr<envs::Environment> env;
    std::vector<double> obs;
    double episode_return = 0.0;
    int episode_length = 0;
    std::uint64_t episodes_started = 0;
    std::mt19937_64 action_rng, attack_rng, bernoulli_rng;
  };

  void start_episode(Actor& a, std::size_t index);
  Trajectory collect(Actor& a, std::size_t index, std::vector<EpisodeRecord>& finished);
  bool attack_step(Actor& a, std::int64_t global_step);
  double restart_kl(double epsilon) const;

  TrainConfig cfg_;
  std::string env_id_;
  nlohmann::json env_params_;
  policy::PolicyNet policy_;
  policy::ValueNet value_;
  Optimizer opt_;
  std::mt19937_64 update_rng_;
  std::vector<Actor> actors_;
  std::int64_t step_ = 0;
  std::int64_t iteration_ = 0;
  std::vector<IterationMetrics> metrics_;
  std::vector<EpisodeRecord> episodes_;
  std::vector<Trajectory> batch_;
};

struct TrainResult {
  policy::PolicyNet policy;
  policy::ValueNet value;
  std::vector<IterationMetrics> metrics;
  std::vector<EpisodeRecord> episodes;
  std::optional<std::int64_t> attack_start_step;
};

TrainResult train(const envs::Environment& env, const TrainConfig& cfg, const std::string& checkpoint_dir = "");
TrainResult train_standard(const envs::Environment& env, TrainConfig cfg);
TrainResult train_atpa(const envs::Environment& env, TrainConfig cfg);
TrainResult train_stagewise(const envs::Environment& env, TrainConfig cfg);
TrainResult train_dataaugment(const envs::Environment& env, TrainConfig cfg);

/// Loads the policy network from a trainer checkpoint.
policy::PolicyNet load_policy(const std::string& path);
policy::ValueNet load_value(const std::string& path);

}  // namespace advrl::training
