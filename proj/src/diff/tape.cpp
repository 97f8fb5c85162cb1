#include "advrl/diff/tape.hpp"

#include <algorithm>
#include <cmath>

#include "advrl/diff/kernels.hpp"
#include "advrl/errors.hpp"

namespace advrl::diff {

const Tensor& Var::value() const {
  if (!tape_) throw UsageError("value() on an unbound Var");
  return tape_->value_of(id_);
}

Var Tape::variable(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, {}, nullptr, true});
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, {}, nullptr, false});
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(Tensor value, std::vector<std::size_t> parents, BackwardFn backward) {
  bool tracked = false;
  for (std::size_t p : parents) tracked = tracked || nodes_[p].requires_grad;
  nodes_.push_back(Node{std::move(value), {}, std::move(parents),
                        tracked ? std::move(backward) : nullptr, tracked});
  return Var(this, nodes_.size() - 1);
}

void Tape::check_owned(Var v, const char* what) const {
  if (v.tape() != this || v.id() >= nodes_.size()) {
    throw UsageError(std::string(what) + ": variable does not belong to this tape");
  }
}

void Tape::backward(Var loss) {
  check_owned(loss, "backward");
  if (nodes_[loss.id()].value.size() != 1) {
    throw ShapeError("backward() needs a scalar loss, got " +
                     shape_string(nodes_[loss.id()].value.shape()));
  }
  for (auto& n : nodes_) n.grad = Tensor::zeros_like(n.value);
  has_backward_ = true;
  if (!nodes_[loss.id()].requires_grad) return;
  nodes_[loss.id()].grad[0] = 1.0;
  for (std::size_t id = loss.id() + 1; id-- > 0;) {
    if (nodes_[id].backward) nodes_[id].backward(*this, id);
  }
}

const Tensor& Tape::grad(Var v) const {
  check_owned(v, "grad");
  if (!has_backward_) throw UsageError("grad() requested before backward()");
  return nodes_[v.id()].grad;
}

bool Tape::requires_grad(Var v) const {
  check_owned(v, "requires_grad");
  return nodes_[v.id()].requires_grad;
}

void Tape::accumulate(std::size_t id, std::span<const double> g) {
  Node& n = nodes_[id];
  if (!n.requires_grad) return;
  for (std::size_t i = 0; i < g.size(); ++i) n.grad[i] += g[i];
}

namespace {

Tape& common_tape(Var a, Var b) {
  if (!a.valid() || a.tape() != b.tape()) {
    throw UsageError("operands live on different tapes");
  }
  return *a.tape();
}

Tape& tape_of(Var a) {
  if (!a.valid()) throw UsageError("operation on an unbound Var");
  return *a.tape();
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape " + shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
  }
}

template <class F, class D>
Var unary(Var x, F f, D df_from_xy) {
  Tape& t = tape_of(x);
  const Tensor& xv = x.value();
  Tensor y = xv;
  for (double& v : y.data()) v = f(v);
  const std::size_t xi = x.id();
  return t.record(std::move(y), {xi}, [xi, df_from_xy](Tape& tp, std::size_t self) {
    if (!tp.tracks(xi)) return;
    const Tensor& xv = tp.value_of(xi);
    const Tensor& yv = tp.value_of(self);
    const Tensor& g = tp.grad_of(self);
    Tensor& gx = tp.grad_buffer(xi);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * df_from_xy(xv[i], yv[i]);
  });
}

}  // namespace

Var linear(Var x, Var w, Var b) {
  Tape& t = common_tape(x, w);
  common_tape(w, b);
  const Tensor& xv = x.value();
  const Tensor& wv = w.value();
  const Tensor& bv = b.value();
  if (wv.rank() != 2 || bv.rank() != 1 || bv.size() != wv.dim(0)) {
    throw ShapeError("linear: weight " + shape_string(wv.shape()) + " / bias " +
                     shape_string(bv.shape()) + " mismatch");
  }
  if ((xv.rank() != 1 && xv.rank() != 2) || xv.cols() != wv.dim(1)) {
    throw ShapeError("linear: input " + shape_string(xv.shape()) + " vs weight " +
                     shape_string(wv.shape()));
  }
  const std::size_t out = wv.dim(0), in = wv.dim(1), batch = xv.rows();
  Tensor y = xv.rank() == 1 ? Tensor::zeros({out}) : Tensor::zeros({batch, out});
  for (std::size_t r = 0; r < batch; ++r) kernels::affine(wv.values(), bv.values(), xv.row(r), y.row(r));

  const std::size_t xi = x.id(), wi = w.id(), bi = b.id();
  return t.record(std::move(y), {xi, wi, bi},
                  [xi, wi, bi, out, in, batch](Tape& tp, std::size_t self) {
                    const Tensor& g = tp.grad_of(self);
                    const Tensor& xv = tp.value_of(xi);
                    const Tensor& wv = tp.value_of(wi);
                    if (tp.tracks(xi)) {
                      Tensor& gx = tp.grad_buffer(xi);
                      for (std::size_t r = 0; r < batch; ++r) {
                        auto gr = g.row(r);
                        auto gxr = gx.row(r);
                        for (std::size_t o = 0; o < out; ++o) {
                          const double go = gr[o];
                          const double* wr = wv.data().data() + o * in;
                          for (std::size_t i = 0; i < in; ++i) gxr[i] += go * wr[i];
                        }
                      }
                    }
                    if (tp.tracks(wi)) {
                      Tensor& gw = tp.grad_buffer(wi);
                      for (std::size_t r = 0; r < batch; ++r) {
                        auto gr = g.row(r);
                        auto xr = xv.row(r);
                        for (std::size_t o = 0; o < out; ++o) {
                          const double go = gr[o];
                          double* gwr = gw.data().data() + o * in;
                          for (std::size_t i = 0; i < in; ++i) gwr[i] += go * xr[i];
                        }
                      }
                    }
                    if (tp.tracks(bi)) {
                      Tensor& gb = tp.grad_buffer(bi);
                      for (std::size_t r = 0; r < batch; ++r) {
                        auto gr = g.row(r);
                        for (std::size_t o = 0; o < out; ++o) gb[o] += gr[o];
                      }
                    }
                  });
}

Var tanh(Var x) {
  return unary(
      x, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

Var relu(Var x) {
  return unary(
      x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double xv, double) { return xv > 0.0 ? 1.0 : 0.0; });
}

Var exp(Var x) {
  return unary(
      x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Var square(Var x) {
  return unary(
      x, [](double v) { return v * v; }, [](double xv, double) { return 2.0 * xv; });
}

Var scale(Var x, double c) {
  return unary(
      x, [c](double v) { return c * v; }, [c](double, double) { return c; });
}

Var add_scalar(Var x, double c) {
  return unary(
      x, [c](double v) { return v + c; }, [](double, double) { return 1.0; });
}

Var neg(Var x) {
  return unary(
      x, [](double v) { return -v; }, [](double, double) { return -1.0; });
}

Var clamp(Var x, double lo, double hi) {
  return unary(
      x, [lo, hi](double v) { return std::clamp(v, lo, hi); },
      [lo, hi](double xv, double) { return (xv < lo || xv > hi) ? 0.0 : 1.0; });
}

Var add(Var a, Var b) {
  Tape& t = common_tape(a, b);
  require_same_shape(a.value(), b.value(), "add");
  Tensor y = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += bv[i];
  const std::size_t ai = a.id(), bi = b.id();
  return t.record(std::move(y), {ai, bi}, [ai, bi](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad_of(self);
    tp.accumulate(ai, g.values());
    tp.accumulate(bi, g.values());
  });
}

Var sub(Var a, Var b) {
  Tape& t = common_tape(a, b);
  require_same_shape(a.value(), b.value(), "sub");
  Tensor y = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] -= bv[i];
  const std::size_t ai = a.id(), bi = b.id();
  return t.record(std::move(y), {ai, bi}, [ai, bi](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad_of(self);
    tp.accumulate(ai, g.values());
    if (tp.tracks(bi)) {
      Tensor& gb = tp.grad_buffer(bi);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
    }
  });
}

Var mul(Var a, Var b) {
  Tape& t = common_tape(a, b);
  require_same_shape(a.value(), b.value(), "mul");
  Tensor y = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= bv[i];
  const std::size_t ai = a.id(), bi = b.id();
  return t.record(std::move(y), {ai, bi}, [ai, bi](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad_of(self);
    const Tensor& av = tp.value_of(ai);
    const Tensor& bv = tp.value_of(bi);
    if (tp.tracks(ai)) {
      Tensor& ga = tp.grad_buffer(ai);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
    }
    if (tp.tracks(bi)) {
      Tensor& gb = tp.grad_buffer(bi);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
    }
  });
}

Var sum(Var x) {
  Tape& t = tape_of(x);
  double s = 0.0;
  for (double v : x.value().values()) s += v;
  const std::size_t xi = x.id();
  return t.record(Tensor::scalar(s), {xi}, [xi](Tape& tp, std::size_t self) {
    if (!tp.tracks(xi)) return;
    const double g = tp.grad_of(self)[0];
    for (double& v : tp.grad_buffer(xi).data()) v += g;
  });
}

Var mean(Var x) {
  Tape& t = tape_of(x);
  const std::size_t n = x.value().size();
  if (n == 0) throw UsageError("mean of an empty tensor");
  double s = 0.0;
  for (double v : x.value().values()) s += v;
  const std::size_t xi = x.id();
  return t.record(Tensor::scalar(s / static_cast<double>(n)), {xi},
                  [xi, n](Tape& tp, std::size_t self) {
                    if (!tp.tracks(xi)) return;
                    const double g = tp.grad_of(self)[0] / static_cast<double>(n);
                    for (double& v : tp.grad_buffer(xi).data()) v += g;
                  });
}

Var dot(Var a, Var b) {
  Tape& t = common_tape(a, b);
  require_same_shape(a.value(), b.value(), "dot");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  double s = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) s += av[i] * bv[i];
  const std::size_t ai = a.id(), bi = b.id();
  return t.record(Tensor::scalar(s), {ai, bi}, [ai, bi](Tape& tp, std::size_t self) {
    const double g = tp.grad_of(self)[0];
    const Tensor& av = tp.value_of(ai);
    const Tensor& bv = tp.value_of(bi);
    if (tp.tracks(ai)) {
      Tensor& ga = tp.grad_buffer(ai);
      for (std::size_t i = 0; i < av.size(); ++i) ga[i] += g * bv[i];
    }
    if (tp.tracks(bi)) {
      Tensor& gb = tp.grad_buffer(bi);
      for (std::size_t i = 0; i < bv.size(); ++i) gb[i] += g * av[i];
    }
  });
}

Var log_softmax(Var logits) {
  Tape& t = tape_of(logits);
  const Tensor& lv = logits.value();
  if (lv.size() == 0 || lv.cols() == 0) throw UsageError("log_softmax of an empty tensor");
  if (lv.rank() == 0) throw ShapeError("log_softmax needs a vector or matrix");
  Tensor y = Tensor::zeros_like(lv);
  for (std::size_t r = 0; r < lv.rows(); ++r) kernels::log_softmax(lv.row(r), y.row(r));
  const std::size_t li = logits.id();
  return t.record(std::move(y), {li}, [li](Tape& tp, std::size_t self) {
    if (!tp.tracks(li)) return;
    const Tensor& g = tp.grad_of(self);
    const Tensor& yv = tp.value_of(self);
    Tensor& gl = tp.grad_buffer(li);
    for (std::size_t r = 0; r < yv.rows(); ++r) {
      auto gr = g.row(r);
      auto yr = yv.row(r);
      auto glr = gl.row(r);
      double gsum = 0.0;
      for (double v : gr) gsum += v;
      for (std::size_t i = 0; i < yr.size(); ++i) glr[i] += gr[i] - std::exp(yr[i]) * gsum;
    }
  });
}

Var softmax(Var logits) { return exp(log_softmax(logits)); }

Var pick(Var x, std::span<const std::size_t> index) {
  Tape& t = tape_of(x);
  const Tensor& xv = x.value();
  if (xv.rank() == 0) throw ShapeError("pick needs a vector or matrix");
  const std::size_t rows = xv.rows(), cols = xv.cols();
  if (index.size() != rows) {
    throw ShapeError("pick: " + std::to_string(index.size()) + " indices for " +
                     std::to_string(rows) + " rows");
  }
  Tensor y = Tensor::zeros({rows});
  std::vector<std::size_t> idx(index.begin(), index.end());
  for (std::size_t r = 0; r < rows; ++r) {
    if (idx[r] >= cols) throw UsageError("pick: index out of range");
    y[r] = xv[r * cols + idx[r]];
  }
  const std::size_t xi = x.id();
  return t.record(std::move(y), {xi},
                  [xi, cols, idx = std::move(idx)](Tape& tp, std::size_t self) {
                    if (!tp.tracks(xi)) return;
                    const Tensor& g = tp.grad_of(self);
                    Tensor& gx = tp.grad_buffer(xi);
                    for (std::size_t r = 0; r < idx.size(); ++r) gx[r * cols + idx[r]] += g[r];
                  });
}

Var minimum(Var a, Var b) {
  Tape& t = common_tape(a, b);
  require_same_shape(a.value(), b.value(), "minimum");
  Tensor y = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = std::min(y[i], bv[i]);
  const std::size_t ai = a.id(), bi = b.id();
  return t.record(std::move(y), {ai, bi}, [ai, bi](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad_of(self);
    const Tensor& av = tp.value_of(ai);
    const Tensor& bv = tp.value_of(bi);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const bool take_a = av[i] <= bv[i];
      if (take_a && tp.tracks(ai)) tp.grad_buffer(ai)[i] += g[i];
      if (!take_a && tp.tracks(bi)) tp.grad_buffer(bi)[i] += g[i];
    }
  });
}

Tensor grad_wrt_input(Var loss, Var x) {
  if (!loss.valid() || !x.valid() || loss.tape() != x.tape()) {
    throw UsageError("grad_wrt_input: input is not on the loss tape");
  }
  Tape& t = *loss.tape();
  if (!t.requires_grad(x)) {
    throw UsageError("grad_wrt_input: input was recorded as a constant");
  }
  t.backward(loss);
  return t.grad(x);
}

}  // namespace advrl::diff
