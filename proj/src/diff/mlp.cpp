#include "advrl/diff/mlp.hpp"

#include <cmath>

#include "advrl/diff/kernels.hpp"
#include "advrl/errors.hpp"

namespace advrl::diff {

std::string to_string(Activation a) {
  switch (a) {
    case Activation::kTanh: return "tanh";
    case Activation::kRelu: return "relu";
    case Activation::kLinear: return "linear";
  }
  return "?";
}

Activation activation_from_string(const std::string& s) {
  if (s == "tanh") return Activation::kTanh;
  if (s == "relu") return Activation::kRelu;
  if (s == "linear") return Activation::kLinear;
  throw ConfigError("unknown activation '" + s + "'");
}

std::size_t MlpParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.weight.size() + l.bias.size();
  return n;
}

void MlpParams::validate() const {
  if (layers.empty()) throw ShapeError("MLP has no layers");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const Layer& l = layers[i];
    if (l.weight.rank() != 2 || l.bias.rank() != 1 || l.bias.size() != l.weight.dim(0)) {
      throw ShapeError("layer " + std::to_string(i) + " has inconsistent weight/bias shapes");
    }
    if (i > 0 && layers[i - 1].out() != l.in()) {
      throw ShapeError("layer " + std::to_string(i) + " expects " + std::to_string(l.in()) +
                       " inputs but previous layer emits " + std::to_string(layers[i - 1].out()));
    }
  }
  if (layers.back().activation != Activation::kLinear) {
    throw ShapeError("final MLP layer must be linear");
  }
}

MlpParams MlpParams::zeros_like() const {
  MlpParams z = *this;
  for (auto& l : z.layers) {
    l.weight = Tensor::zeros_like(l.weight);
    l.bias = Tensor::zeros_like(l.bias);
  }
  return z;
}

MlpParams make_mlp(const std::vector<std::size_t>& sizes, Activation hidden,
                   std::mt19937_64& rng, double output_gain) {
  if (sizes.size() < 2) throw ShapeError("make_mlp needs at least input and output sizes");
  MlpParams p;
  for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
    const std::size_t in = sizes[i], out = sizes[i + 1];
    const bool last = i + 2 == sizes.size();
    const double bound = (last ? output_gain : 1.0) / std::sqrt(static_cast<double>(in));
    std::uniform_real_distribution<double> u(-bound, bound);
    std::vector<double> w(out * in);
    for (double& v : w) v = u(rng);
    p.layers.push_back(Layer{Tensor::matrix(out, in, std::move(w)), Tensor::zeros({out}),
                             last ? Activation::kLinear : hidden});
  }
  return p;
}

namespace {

void apply_activation(Activation a, std::span<double> v) {
  switch (a) {
    case Activation::kTanh:
      for (double& x : v) x = std::tanh(x);
      break;
    case Activation::kRelu:
      for (double& x : v) x = x > 0.0 ? x : 0.0;
      break;
    case Activation::kLinear:
      break;
  }
}

}  // namespace

Tensor forward_mlp(const MlpParams& params, const Tensor& x) {
  if (params.layers.empty()) throw ShapeError("MLP has no layers");
  if ((x.rank() != 1 && x.rank() != 2) || x.cols() != params.input_dim()) {
    throw ShapeError("MLP input " + shape_string(x.shape()) + " vs input dimension " +
                     std::to_string(params.input_dim()));
  }
  const std::size_t batch = x.rows();
  Tensor h = x;
  for (const Layer& l : params.layers) {
    Tensor y = x.rank() == 1 ? Tensor::zeros({l.out()}) : Tensor::zeros({batch, l.out()});
    for (std::size_t r = 0; r < batch; ++r) {
      kernels::affine(l.weight.values(), l.bias.values(), h.row(r), y.row(r));
    }
    apply_activation(l.activation, y.values());
    h = std::move(y);
  }
  return h;
}

MlpVars bind_mlp(Tape& tape, const MlpParams& params, bool track) {
  MlpVars v;
  for (const Layer& l : params.layers) {
    v.weights.push_back(track ? tape.variable(l.weight) : tape.constant(l.weight));
    v.biases.push_back(track ? tape.variable(l.bias) : tape.constant(l.bias));
  }
  return v;
}

Var forward_mlp(const MlpParams& params, const MlpVars& vars, Var x) {
  if (vars.weights.size() != params.layers.size()) {
    throw UsageError("MLP variables were bound for a different network");
  }
  if (x.value().cols() != params.input_dim()) {
    throw ShapeError("MLP input " + shape_string(x.shape()) + " vs input dimension " +
                     std::to_string(params.input_dim()));
  }
  Var h = x;
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    h = linear(h, vars.weights[i], vars.biases[i]);
    switch (params.layers[i].activation) {
      case Activation::kTanh: h = tanh(h); break;
      case Activation::kRelu: h = relu(h); break;
      case Activation::kLinear: break;
    }
  }
  return h;
}

MlpParams grad_wrt_params(const Tape& tape, const MlpParams& params, const MlpVars& vars) {
  if (vars.weights.size() != params.layers.size()) {
    throw UsageError("MLP variables were bound for a different network");
  }
  MlpParams g = params;
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    g.layers[i].weight = tape.grad(vars.weights[i]);
    g.layers[i].bias = tape.grad(vars.biases[i]);
  }
  return g;
}

std::vector<double> flatten(const MlpParams& params) {
  std::vector<double> flat;
  flat.reserve(params.parameter_count());
  for (const auto& l : params.layers) {
    flat.insert(flat.end(), l.weight.data().begin(), l.weight.data().end());
    flat.insert(flat.end(), l.bias.data().begin(), l.bias.data().end());
  }
  return flat;
}

void unflatten(std::span<const double> flat, MlpParams& params) {
  if (flat.size() != params.parameter_count()) {
    throw ShapeError("flat parameter vector has " + std::to_string(flat.size()) +
                     " entries, network needs " + std::to_string(params.parameter_count()));
  }
  std::size_t k = 0;
  for (auto& l : params.layers) {
    for (double& v : l.weight.data()) v = flat[k++];
    for (double& v : l.bias.data()) v = flat[k++];
  }
}

}  // namespace advrl::diff
