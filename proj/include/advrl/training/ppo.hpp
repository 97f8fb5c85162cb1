#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include "advrl/diff/tape.hpp"
#include "advrl/policy/policy.hpp"
#include "advrl/training/config.hpp"

namespace advrl::training {

struct StepRecord {
  std::vector<double> clean_obs;
  std::vector<double> delta;
  /// clean_obs + delta, elementwise.
  std::vector<double> perturbed_obs;
  std::size_t action = 0;
  double reward = 0.0;
  bool terminated = false;
  bool truncated = false;
  /// log pi_old(action | perturbed_obs) from the collection snapshot.
  double log_prob_old = 0.0;
  /// V(perturbed_obs) from the collection snapshot.
  double value = 0.0;
  /// V of the next observation, used when the episode is cut here by the
  /// horizon or by the end of the segment. Zero otherwise.
  double bootstrap_value = 0.0;
  bool attacked = false;
};

/// One actor's contiguous segment of T steps (may span several episodes).
struct Trajectory {
  std::vector<StepRecord> steps;
};

struct AdvantageEstimate {
  std::vector<double> advantage;
  /// advantage + value.
  std::vector<double> target;
};

/// A_t = sum_l (gamma lambda)^l d_{t+l}, d_t = r_t + gamma V_next - V_t.
/// V_next is 0 after termination, the recorded bootstrap value after a
/// truncation or at the segment end, and the next step's value otherwise.
AdvantageEstimate gae(const Trajectory& traj, double gamma, double lambda);

/// Per-sample clipped objective min(r A, clip(r, 1 - rho, 1 + rho) A).
double clipped_objective(double ratio, double advantage, double clip);

/// Flat minibatch consumed by the surrogate.
struct PpoBatch {
  std::vector<std::vector<double>> obs;
  std::vector<std::size_t> actions;
  std::vector<double> log_prob_old;
  std::vector<double> advantages;
  std::vector<double> targets;
};

struct SurrogateTerms {
  diff::Var surrogate;     // mean clipped objective
  diff::Var unclipped;     // mean r A
  diff::Var value_loss;    // 0.5 mean (V - target)^2
  diff::Var entropy;       // mean policy entropy
  diff::Var log_prob;      // [B]
  diff::Var ratio;         // [B]
};

/// Records the PPO terms for a batch on `tape`. Observations enter as constants.
SurrogateTerms record_surrogate(diff::Tape& tape, const policy::PolicyNet& pol, const diff::MlpVars& pvars,
                                const policy::ValueNet& val, const diff::MlpVars& vvars, const PpoBatch& batch,
                                double clip);

/// SGD or Adam over a flat parameter vector. step() descends on `grad`.
class Optimizer {
 public:
  Optimizer() = default;
  Optimizer(OptimizerTag tag, std::size_t size, double beta1, double beta2, double epsilon);

  void step(std::span<double> params, std::span<const double> grad, double lr);

  OptimizerTag tag() const { return tag_; }
  std::int64_t count() const { return t_; }
  std::vector<double>& first_moment() { return m_; }
  std::vector<double>& second_moment() { return v_; }
  const std::vector<double>& first_moment() const { return m_; }
  const std::vector<double>& second_moment() const { return v_; }
  void set_count(std::int64_t t) { t_ = t; }

 private:
  OptimizerTag tag_ = OptimizerTag::kSgd;
  double beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
  std::int64_t t_ = 0;
  std::vector<double> m_, v_;
};

/// Rescales `grad` in place so its 2-norm is at most max_norm; returns the
/// norm before scaling.
double clip_grad_norm(std::span<double> grad, double max_norm);

struct UpdateDiagnostics {
  double surrogate = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  /// Sample estimate mean(log pi_old - log pi_new) after the update.
  double approx_kl = 0.0;
  /// Fraction of samples with |r - 1| > rho in the last epoch.
  double clip_fraction = 0.0;
  double grad_norm = 0.0;
};

/// Runs `epochs` passes of shuffled minibatch descent on
/// -surrogate + value_coef * value_loss - entropy_coef * entropy.
/// Throws NumericError on a non-finite loss.
UpdateDiagnostics ppo_update(policy::PolicyNet& pol, policy::ValueNet& val, Optimizer& opt,
                             const std::vector<Trajectory>& trajectories, const TrainConfig& cfg, double lr,
                             double clip, std::mt19937_64& rng);

/// Policy parameters followed by value parameters.
std::vector<double> flatten(const policy::PolicyNet& pol, const policy::ValueNet& val);
void unflatten(std::span<const double> flat, policy::PolicyNet& pol, policy::ValueNet& val);

}  // namespace advrl::training
