#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "advrl/diff/tensor.hpp"

namespace advrl::diff {

class Tape;

/// Handle to a node recorded on a Tape. Cheap to copy; valid only while the
/// owning tape is alive.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const std::vector<std::size_t>& shape() const { return value().shape(); }
  Tape* tape() const { return tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Define-by-run reverse-mode tape. Nodes are appended in evaluation order,
/// which is a topological order, so backward() is a single reverse sweep.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf whose gradient is tracked.
  Var variable(Tensor value);
  /// Leaf excluded from differentiation.
  Var constant(Tensor value);

  /// Seeds d(loss)/d(loss) = 1 and propagates to every recorded node.
  /// Nodes not on a path to `loss` end with an exactly-zero gradient.
  void backward(Var loss);

  /// Gradient of the last backward() loss with respect to `v`.
  const Tensor& grad(Var v) const;

  bool requires_grad(Var v) const;
  std::size_t size() const { return nodes_.size(); }

  // Used by op implementations.
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;
  Var record(Tensor value, std::vector<std::size_t> parents, BackwardFn backward);
  const Tensor& value_of(std::size_t id) const { return nodes_[id].value; }
  const Tensor& grad_of(std::size_t id) const { return nodes_[id].grad; }
  /// Adds `g` into the gradient accumulator of node `id` (no-op for constants).
  void accumulate(std::size_t id, std::span<const double> g);
  Tensor& grad_buffer(std::size_t id) { return nodes_[id].grad; }
  bool tracks(std::size_t id) const { return nodes_[id].requires_grad; }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    std::vector<std::size_t> parents;
    BackwardFn backward;
    bool requires_grad = false;
  };

  void check_owned(Var v, const char* what) const;

  std::vector<Node> nodes_;
  bool has_backward_ = false;
};

// Recorded operations. All operands must live on the same tape.

/// x: [in] or [batch, in]; w: [out, in]; b: [out]. Returns [out] or [batch, out].
Var linear(Var x, Var w, Var b);
Var tanh(Var x);
Var relu(Var x);
Var exp(Var x);
Var square(Var x);
Var add(Var a, Var b);
Var sub(Var a, Var b);
/// Elementwise product of equally shaped tensors.
Var mul(Var a, Var b);
Var scale(Var x, double c);
Var add_scalar(Var x, double c);
Var neg(Var x);
/// Sum of all elements -> scalar.
Var sum(Var x);
/// Mean of all elements -> scalar.
Var mean(Var x);
/// Inner product of two vectors -> scalar.
Var dot(Var a, Var b);
/// Row-wise numerically stabilized log-softmax.
Var log_softmax(Var logits);
/// Row-wise softmax, computed as exp(log_softmax).
Var softmax(Var logits);
/// Row-wise selection: out[r] = x[r, index[r]]. For a vector x, index has one entry.
Var pick(Var x, std::span<const std::size_t> index);
/// Elementwise clamp; gradient is zero where the bound is active.
Var clamp(Var x, double lo, double hi);
/// Elementwise minimum; ties route the gradient to `a`.
Var minimum(Var a, Var b);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var operator-(Var a) { return neg(a); }
inline Var operator*(double c, Var x) { return scale(x, c); }

/// d loss / d x after running backward on `loss`'s tape. Throws UsageError
/// when `x` is not a tracked leaf of that tape.
Tensor grad_wrt_input(Var loss, Var x);

}  // namespace advrl::diff
