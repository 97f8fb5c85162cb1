#include "advrl/diff/softmax.hpp"

#include "advrl/diff/kernels.hpp"
#include "advrl/errors.hpp"

namespace advrl::diff {

namespace {

void check_logits(const Tensor& logits) {
  if (logits.size() == 0) throw UsageError("softmax of an empty logit vector");
  if (logits.rank() != 1) throw ShapeError("softmax expects a 1-D logit vector");
}

}  // namespace

Tensor log_softmax(const Tensor& logits) {
  check_logits(logits);
  Tensor out = Tensor::zeros_like(logits);
  kernels::log_softmax(logits.values(), out.values());
  return out;
}

Tensor softmax(const Tensor& logits) {
  check_logits(logits);
  Tensor out = Tensor::zeros_like(logits);
  kernels::softmax(logits.values(), out.values());
  return out;
}

}  // namespace advrl::diff
