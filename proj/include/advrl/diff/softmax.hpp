#pragma once

#include "advrl/diff/tensor.hpp"

namespace advrl::diff {

/// Stabilized log-softmax of a 1-D logit vector. Throws UsageError when empty.
Tensor log_softmax(const Tensor& logits);

/// exp(log_softmax(logits)); sums to one within a few ulps.
Tensor softmax(const Tensor& logits);

}  // namespace advrl::diff
