#pragma once

// Independent oracles shared by the unit and acceptance suites. Nothing here
// calls the tape: finite differences go through the tape-free forward pass.

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "advrl/diff/mlp.hpp"

namespace advrl::oracle {

/// |a - b| relative to the larger magnitude, floored so that coordinates that
/// are both essentially zero compare on an absolute scale.
inline double relative_error(double a, double b, double floor = 1e-6) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

/// Central differences of f at x with step h.
inline std::vector<double> central_difference(const std::function<double(const std::vector<double>&)>& f,
                                              std::vector<double> x, double h = 1e-5) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + h;
    const double up = f(x);
    x[i] = keep - h;
    const double down = f(x);
    x[i] = keep;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

/// Small random network with sizes drawn from `rng`; weights scaled so that
/// tanh units stay away from saturation.
inline diff::MlpParams random_mlp(std::mt19937_64& rng, std::size_t in, std::size_t out,
                                  diff::Activation act = diff::Activation::kTanh) {
  std::uniform_int_distribution<std::size_t> width(2, 8);
  std::uniform_int_distribution<int> depth(1, 2);
  std::vector<std::size_t> sizes{in};
  for (int d = depth(rng); d > 0; --d) sizes.push_back(width(rng));
  sizes.push_back(out);
  auto p = diff::make_mlp(sizes, act, rng, 1.0);
  std::normal_distribution<double> n(0.0, 0.3);
  for (auto& l : p.layers) {
    for (double& b : l.bias.data()) b = n(rng);
  }
  return p;
}

inline std::vector<double> random_vector(std::mt19937_64& rng, std::size_t n, double lo = -1.0,
                                         double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (double& x : v) x = u(rng);
  return v;
}

}  // namespace advrl::oracle
