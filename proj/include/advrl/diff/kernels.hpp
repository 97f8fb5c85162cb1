#pragma once

// Arithmetic shared by the tape-free forward pass and the recorded ops.
// Both paths must round identically so that, e.g., a PPO ratio computed
// against a stored log-probability is exactly one at the snapshot.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>

namespace advrl::diff::kernels {

/// y[o] = sum_i w[o * in + i] * x[i] + b[o], accumulated in index order.
inline void affine(std::span<const double> w, std::span<const double> b,
                   std::span<const double> x, std::span<double> y) {
  const std::size_t in = x.size();
  for (std::size_t o = 0; o < y.size(); ++o) {
    const double* wr = w.data() + o * in;
    double acc = 0.0;
    for (std::size_t i = 0; i < in; ++i) acc += wr[i] * x[i];
    y[o] = acc + b[o];
  }
}

inline void log_softmax(std::span<const double> logits, std::span<double> out) {
  const double m = *std::max_element(logits.begin(), logits.end());
  double s = 0.0;
  for (double l : logits) s += std::exp(l - m);
  const double log_s = std::log(s);
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = (logits[i] - m) - log_s;
}

/// softmax computed as exp(log_softmax) so that p == exp(log p) holds exactly.
inline void softmax(std::span<const double> logits, std::span<double> out) {
  log_softmax(logits, out);
  for (double& v : out) v = std::exp(v);
}

}  // namespace advrl::diff::kernels
