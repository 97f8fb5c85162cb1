#include "advrl/policy/policy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "advrl/diff/kernels.hpp"
#include "advrl/errors.hpp"

namespace advrl::policy {

namespace {

std::vector<std::size_t> layer_sizes(std::size_t in, const NetShape& shape, std::size_t out) {
  std::vector<std::size_t> sizes{in};
  sizes.insert(sizes.end(), shape.hidden.begin(), shape.hidden.end());
  sizes.push_back(out);
  return sizes;
}

diff::Tensor input(std::size_t expected, std::span<const double> obs) {
  if (obs.size() != expected) {
    throw ShapeError("observation has " + std::to_string(obs.size()) + " entries, net expects " +
                     std::to_string(expected));
  }
  return diff::Tensor::vector(std::vector<double>(obs.begin(), obs.end()));
}

}  // namespace

PolicyNet make_policy_net(std::size_t obs_dim, std::size_t actions, const NetShape& shape,
                          std::mt19937_64& rng, double output_gain) {
  if (actions < 2) throw UsageError("a policy needs at least two actions");
  return {diff::make_mlp(layer_sizes(obs_dim, shape, actions), shape.activation, rng, output_gain)};
}

ValueNet make_value_net(std::size_t obs_dim, const NetShape& shape, std::mt19937_64& rng, double output_gain) {
  return {diff::make_mlp(layer_sizes(obs_dim, shape, 1), shape.activation, rng, output_gain)};
}

std::size_t ActionDist::argmax() const {
  return static_cast<std::size_t>(std::max_element(probabilities.begin(), probabilities.end()) -
                                  probabilities.begin());
}

std::size_t ActionDist::argmin() const {
  return static_cast<std::size_t>(std::min_element(probabilities.begin(), probabilities.end()) -
                                  probabilities.begin());
}

ActionDist dist_from_logits(std::span<const double> logits) {
  if (logits.empty()) throw UsageError("empty logits");
  ActionDist d;
  d.log_probabilities.resize(logits.size());
  diff::kernels::log_softmax(logits, d.log_probabilities);
  d.probabilities.resize(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) d.probabilities[i] = std::exp(d.log_probabilities[i]);
  return d;
}

ActionDist dist(const PolicyNet& policy, std::span<const double> obs) {
  const diff::Tensor logits = diff::forward_mlp(policy.mlp, input(policy.observation_dim(), obs));
  return dist_from_logits(logits.values());
}

double value(const ValueNet& net, std::span<const double> obs) {
  return diff::forward_mlp(net.mlp, input(net.observation_dim(), obs)).values()[0];
}

std::size_t sample(const ActionDist& d, std::mt19937_64& rng) {
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  double acc = 0.0;
  for (std::size_t a = 0; a < d.size(); ++a) {
    acc += d.probabilities[a];
    if (u < acc) return a;
  }
  // Rounding left a sliver above the cumulative sum: take the last positive action.
  for (std::size_t a = d.size(); a-- > 0;) {
    if (d.probabilities[a] > 0.0) return a;
  }
  return d.size() - 1;
}

double entropy(const ActionDist& d) {
  double h = 0.0;
  for (std::size_t a = 0; a < d.size(); ++a) {
    if (d.probabilities[a] > 0.0) h -= d.probabilities[a] * d.log_probabilities[a];
  }
  return std::max(h, 0.0);
}

double kl(const ActionDist& p, const ActionDist& q) {
  if (p.size() != q.size()) throw ShapeError("kl between distributions of different sizes");
  double total = 0.0;
  for (std::size_t a = 0; a < p.size(); ++a) {
    if (p.probabilities[a] <= 0.0) continue;
    if (q.probabilities[a] <= 0.0) return std::numeric_limits<double>::infinity();
    total += p.probabilities[a] * (p.log_probabilities[a] - q.log_probabilities[a]);
  }
  return std::max(total, 0.0);
}

double cross_entropy(const ActionDist& p_perturbed, const ActionDist& p_clean) {
  if (p_perturbed.size() != p_clean.size()) throw ShapeError("cross entropy between different sizes");
  double total = 0.0;
  for (std::size_t a = 0; a < p_clean.size(); ++a) {
    if (p_perturbed.probabilities[a] > 0.0) total -= p_perturbed.probabilities[a] * p_clean.log_probabilities[a];
  }
  return total;
}

}  // namespace advrl::policy
