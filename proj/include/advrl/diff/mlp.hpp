#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "advrl/diff/tape.hpp"
#include "advrl/diff/tensor.hpp"

namespace advrl::diff {

enum class Activation { kTanh, kRelu, kLinear };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);

struct Layer {
  Tensor weight;  // [out, in]
  Tensor bias;    // [out]
  Activation activation = Activation::kTanh;

  std::size_t in() const { return weight.dim(1); }
  std::size_t out() const { return weight.dim(0); }
  friend bool operator==(const Layer&, const Layer&) = default;
};

/// Weights of a fully connected network. The last layer is always linear.
struct MlpParams {
  std::vector<Layer> layers;

  std::size_t input_dim() const { return layers.front().in(); }
  std::size_t output_dim() const { return layers.back().out(); }
  std::size_t parameter_count() const;

  /// Throws ShapeError if consecutive layers do not chain.
  void validate() const;

  /// Same architecture, all weights zero.
  MlpParams zeros_like() const;

  friend bool operator==(const MlpParams&, const MlpParams&) = default;
};

/// Uniform init in [-g/sqrt(in), g/sqrt(in)] with g = 1 for hidden layers and
/// g = `output_gain` for the final one. Biases start at zero.
MlpParams make_mlp(const std::vector<std::size_t>& sizes, Activation hidden,
                   std::mt19937_64& rng, double output_gain = 1.0);

/// Tape-free forward pass. `x` is [in] or [batch, in].
Tensor forward_mlp(const MlpParams& params, const Tensor& x);

/// Parameters recorded on a tape.
struct MlpVars {
  std::vector<Var> weights;
  std::vector<Var> biases;
};

/// Records every weight and bias as a tracked leaf (or constant).
MlpVars bind_mlp(Tape& tape, const MlpParams& params, bool track = true);

/// Recorded forward pass. Rounds identically to forward_mlp().
Var forward_mlp(const MlpParams& params, const MlpVars& vars, Var x);

/// Gradient of the last backward() with respect to each bound parameter.
MlpParams grad_wrt_params(const Tape& tape, const MlpParams& params, const MlpVars& vars);

// Flat views used by optimizers and finite-difference checks.
std::vector<double> flatten(const MlpParams& params);
void unflatten(std::span<const double> flat, MlpParams& params);

}  // namespace advrl::diff
