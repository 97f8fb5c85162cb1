#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include "advrl/diff/mlp.hpp"

namespace advrl::policy {

/// Categorical policy: an MLP producing one logit per action.
struct PolicyNet {
  diff::MlpParams mlp;

  std::size_t observation_dim() const { return mlp.input_dim(); }
  std::size_t action_count() const { return mlp.output_dim(); }
  friend bool operator==(const PolicyNet&, const PolicyNet&) = default;
};

/// State-value estimator: an MLP with a single output.
struct ValueNet {
  diff::MlpParams mlp;

  std::size_t observation_dim() const { return mlp.input_dim(); }
  friend bool operator==(const ValueNet&, const ValueNet&) = default;
};

struct NetShape {
  std::vector<std::size_t> hidden{64, 64};
  diff::Activation activation = diff::Activation::kTanh;
};

/// Small output gain keeps the initial policy close to uniform.
PolicyNet make_policy_net(std::size_t obs_dim, std::size_t actions, const NetShape& shape,
                          std::mt19937_64& rng, double output_gain = 0.01);
ValueNet make_value_net(std::size_t obs_dim, const NetShape& shape, std::mt19937_64& rng,
                        double output_gain = 1.0);

struct ActionDist {
  std::vector<double> probabilities;
  std::vector<double> log_probabilities;

  std::size_t size() const { return probabilities.size(); }
  /// Most likely action, lowest index on ties.
  std::size_t argmax() const;
  /// Least likely action, lowest index on ties.
  std::size_t argmin() const;
};

/// Builds a distribution from logits via a stabilized log-softmax.
ActionDist dist_from_logits(std::span<const double> logits);

/// Throws ShapeError if `obs` does not match the net input.
ActionDist dist(const PolicyNet& policy, std::span<const double> obs);
double value(const ValueNet& net, std::span<const double> obs);

/// Inverse-CDF draw with one uniform variate.
std::size_t sample(const ActionDist& d, std::mt19937_64& rng);

double entropy(const ActionDist& d);
/// KL(p || q). Returns +infinity when q has a zero where p is positive.
double kl(const ActionDist& p, const ActionDist& q);
/// -sum_a p_perturbed(a) log p_clean(a).
double cross_entropy(const ActionDist& p_perturbed, const ActionDist& p_clean);

}  // namespace advrl::policy
