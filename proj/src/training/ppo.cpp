#include "advrl/training/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "advrl/errors.hpp"

namespace advrl::training {

AdvantageEstimate gae(const Trajectory& traj, double gamma, double lambda) {
  const std::size_t n = traj.steps.size();
  AdvantageEstimate out;
  out.advantage.assign(n, 0.0);
  out.target.assign(n, 0.0);
  double next_adv = 0.0;
  for (std::size_t i = n; i-- > 0;) {
    const StepRecord& s = traj.steps[i];
    const bool last = i + 1 == n;
    double next_value = 0.0;
    bool carry = false;
    if (s.terminated) {
      next_value = 0.0;
    } else if (s.truncated || last) {
      next_value = s.bootstrap_value;
    } else {
      next_value = traj.steps[i + 1].value;
      carry = true;
    }
    const double d = s.reward + gamma * next_value - s.value;
    const double a = carry ? d + gamma * lambda * next_adv : d;
    out.advantage[i] = a;
    out.target[i] = a + s.value;
    next_adv = a;
  }
  return out;
}

double clipped_objective(double ratio, double advantage, double clip) {
  return std::min(ratio * advantage, std::clamp(ratio, 1.0 - clip, 1.0 + clip) * advantage);
}

SurrogateTerms record_surrogate(diff::Tape& tape, const policy::PolicyNet& pol, const diff::MlpVars& pvars,
                                const policy::ValueNet& val, const diff::MlpVars& vvars, const PpoBatch& batch,
                                double clip) {
  const std::size_t b = batch.obs.size();
  if (b == 0) throw UsageError("empty PPO batch");
  const std::size_t d = batch.obs.front().size();
  std::vector<double> flat;
  flat.reserve(b * d);
  for (const auto& o : batch.obs) flat.insert(flat.end(), o.begin(), o.end());
  const auto x = tape.constant(diff::Tensor::matrix(b, d, std::move(flat)));

  SurrogateTerms t;
  const auto lsm = diff::log_softmax(diff::forward_mlp(pol.mlp, pvars, x));
  t.log_prob = diff::pick(lsm, batch.actions);
  t.ratio = diff::exp(t.log_prob - tape.constant(diff::Tensor::vector(batch.log_prob_old)));
  const auto adv = tape.constant(diff::Tensor::vector(batch.advantages));
  const auto s1 = t.ratio * adv;
  const auto s2 = diff::clamp(t.ratio, 1.0 - clip, 1.0 + clip) * adv;
  t.surrogate = diff::mean(diff::minimum(s1, s2));
  t.unclipped = diff::mean(s1);
  t.entropy = diff::scale(diff::sum(diff::exp(lsm) * lsm), -1.0 / static_cast<double>(b));

  const auto v = diff::forward_mlp(val.mlp, vvars, x);
  const auto target = tape.constant(diff::Tensor::matrix(b, 1, batch.targets));
  t.value_loss = diff::scale(diff::mean(diff::square(v - target)), 0.5);
  return t;
}

Optimizer::Optimizer(OptimizerTag tag, std::size_t size, double beta1, double beta2, double epsilon)
    : tag_(tag), beta1_(beta1), beta2_(beta2), eps_(epsilon) {
  if (tag_ == OptimizerTag::kAdam) {
    m_.assign(size, 0.0);
    v_.assign(size, 0.0);
  }
}

void Optimizer::step(std::span<double> params, std::span<const double> grad, double lr) {
  if (params.size() != grad.size()) throw ShapeError("optimizer: parameter and gradient sizes differ");
  ++t_;
  if (tag_ == OptimizerTag::kSgd) {
    for (std::size_t i = 0; i < params.size(); ++i) params[i] -= lr * grad[i];
    return;
  }
  if (m_.size() != params.size()) throw ShapeError("optimizer state does not match the parameters");
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grad[i];
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grad[i] * grad[i];
    params[i] -= lr * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps_);
  }
}

double clip_grad_norm(std::span<double> grad, double max_norm) {
  double sq = 0.0;
  for (double g : grad) sq += g * g;
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const double s = max_norm / norm;
    for (double& g : grad) g *= s;
  }
  return norm;
}

std::vector<double> flatten(const policy::PolicyNet& pol, const policy::ValueNet& val) {
  auto out = diff::flatten(pol.mlp);
  const auto v = diff::flatten(val.mlp);
  out.insert(out.end(), v.begin(), v.end());
  return out;
}

void unflatten(std::span<const double> flat, policy::PolicyNet& pol, policy::ValueNet& val) {
  const std::size_t np = pol.mlp.parameter_count();
  if (flat.size() != np + val.mlp.parameter_count()) throw ShapeError("flat parameter vector has the wrong size");
  diff::unflatten(flat.subspan(0, np), pol.mlp);
  diff::unflatten(flat.subspan(np), val.mlp);
}

UpdateDiagnostics ppo_update(policy::PolicyNet& pol, policy::ValueNet& val, Optimizer& opt,
                             const std::vector<Trajectory>& trajectories, const TrainConfig& cfg, double lr,
                             double clip, std::mt19937_64& rng) {
  std::vector<const StepRecord*> steps;
  std::vector<double> adv, targets;
  for (const auto& tr : trajectories) {
    const auto est = gae(tr, cfg.gamma, cfg.gae_lambda);
    for (std::size_t i = 0; i < tr.steps.size(); ++i) {
      steps.push_back(&tr.steps[i]);
      adv.push_back(est.advantage[i]);
      targets.push_back(est.target[i]);
    }
  }
  const std::size_t n = steps.size();
  if (n == 0) throw UsageError("ppo_update with no samples");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  UpdateDiagnostics diag;
  int batches = 0;
  std::size_t clipped = 0, seen_last_epoch = 0;
  const auto mb = static_cast<std::size_t>(cfg.minibatch);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < n; start += mb) {
      const std::size_t end = std::min(n, start + mb);
      PpoBatch batch;
      for (std::size_t k = start; k < end; ++k) {
        const StepRecord& s = *steps[order[k]];
        batch.obs.push_back(s.perturbed_obs);
        batch.actions.push_back(s.action);
        batch.log_prob_old.push_back(s.log_prob_old);
        batch.advantages.push_back(adv[order[k]]);
        batch.targets.push_back(targets[order[k]]);
      }
      if (cfg.normalize_advantages && batch.advantages.size() > 1) {
        const double m = std::accumulate(batch.advantages.begin(), batch.advantages.end(), 0.0) /
                         static_cast<double>(batch.advantages.size());
        double var = 0.0;
        for (double a : batch.advantages) var += (a - m) * (a - m);
        const double sd = std::sqrt(var / static_cast<double>(batch.advantages.size()));
        for (double& a : batch.advantages) a = (a - m) / (sd + 1e-8);
      }

      diff::Tape tape;
      const auto pvars = diff::bind_mlp(tape, pol.mlp);
      const auto vvars = diff::bind_mlp(tape, val.mlp);
      const auto terms = record_surrogate(tape, pol, pvars, val, vvars, batch, clip);
      auto loss = cfg.value_coef * terms.value_loss - terms.surrogate;
      if (cfg.entropy_coef > 0.0) loss = loss - cfg.entropy_coef * terms.entropy;
      const double loss_value = loss.value().item();
      if (!std::isfinite(loss_value)) {
        std::ostringstream msg;
        msg << "non-finite PPO loss at epoch " << epoch << ", minibatch offset " << start
            << ": surrogate=" << terms.surrogate.value().item() << " value_loss=" << terms.value_loss.value().item();
        throw NumericError(msg.str());
      }
      tape.backward(loss);
      auto grad = diff::flatten(diff::grad_wrt_params(tape, pol.mlp, pvars));
      const auto vgrad = diff::flatten(diff::grad_wrt_params(tape, val.mlp, vvars));
      grad.insert(grad.end(), vgrad.begin(), vgrad.end());
      diag.grad_norm = clip_grad_norm(grad, cfg.max_grad_norm);
      auto params = flatten(pol, val);
      opt.step(params, grad, lr);
      unflatten(params, pol, val);

      diag.surrogate += terms.surrogate.value().item();
      diag.value_loss += terms.value_loss.value().item();
      diag.entropy += terms.entropy.value().item();
      ++batches;
      if (epoch + 1 == cfg.epochs) {
        for (double r : terms.ratio.value().values()) {
          if (std::abs(r - 1.0) > clip) ++clipped;
          ++seen_last_epoch;
        }
      }
    }
  }
  diag.surrogate /= batches;
  diag.value_loss /= batches;
  diag.entropy /= batches;
  diag.clip_fraction = static_cast<double>(clipped) / static_cast<double>(seen_last_epoch);
  double kl = 0.0;
  for (const StepRecord* s : steps) kl += s->log_prob_old - policy::dist(pol, s->perturbed_obs).log_probabilities[s->action];
  diag.approx_kl = kl / static_cast<double>(n);
  return diag;
}

}  // namespace advrl::training
