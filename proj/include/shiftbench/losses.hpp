#pragma once

#include <span>

#include "shiftbench/tensor.hpp"

namespace shiftbench {

struct LossResult {
  double value = 0.0;
  Tensor grad;
};

/// Row-wise softmax, max-shifted.
Tensor softmax_rows(const Tensor& logits);

/// Mean of -log p[label] over rows. The returned gradient is taken w.r.t.
/// the pre-softmax logits (probs - onehot) / n, i.e. softmax and the loss
/// are fused. Throws ShapeError on out-of-range labels or rows that do not
/// sum to one within 1e-6.
LossResult cross_entropy_loss(const Tensor& probs, std::span<const int> labels);

/// Fraction of rows whose argmax (lowest index on ties) equals the label.
double accuracy_from_scores(const Tensor& scores, std::span<const int> labels);

/// Row argmax, lowest index wins ties.
std::vector<int> argmax_rows(const Tensor& scores);

}  // namespace shiftbench
