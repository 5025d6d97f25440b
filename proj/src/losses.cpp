#include "shiftbench/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "shiftbench/error.hpp"

namespace shiftbench {

Tensor softmax_rows(const Tensor& logits) {
  Tensor out = logits;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    const double mx = *std::max_element(row.begin(), row.end());
    double s = 0.0;
    for (auto& v : row) {
      v = std::exp(v - mx);
      s += v;
    }
    for (auto& v : row) v /= s;
  }
  return out;
}

LossResult cross_entropy_loss(const Tensor& probs, std::span<const int> labels) {
  if (probs.rank() != 2 || probs.rows() != labels.size()) {
    throw ShapeError("cross_entropy_loss: " + std::to_string(labels.size()) + " labels for probs " +
                     probs.shape_string());
  }
  const std::size_t n = probs.rows(), k = probs.cols();
  LossResult res{0.0, probs};
  for (std::size_t r = 0; r < n; ++r) {
    const int y = labels[r];
    if (y < 0 || static_cast<std::size_t>(y) >= k) {
      throw ShapeError("label " + std::to_string(y) + " out of range for " + std::to_string(k) +
                       " classes");
    }
    auto row = probs.row(r);
    double s = 0.0;
    for (double v : row) s += v;
    if (std::abs(s - 1.0) > 1e-6) throw ShapeError("probability row does not sum to 1");
    res.value -= std::log(std::max(row[static_cast<std::size_t>(y)], 1e-300));
    res.grad(r, static_cast<std::size_t>(y)) -= 1.0;
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  res.value *= inv_n;
  res.grad *= inv_n;
  return res;
}

std::vector<int> argmax_rows(const Tensor& scores) {
  std::vector<int> out(scores.rows());
  for (std::size_t r = 0; r < scores.rows(); ++r) {
    auto row = scores.row(r);
    std::size_t best = 0;
    for (std::size_t c = 1; c < row.size(); ++c) {
      if (row[c] > row[best]) best = c;
    }
    out[r] = static_cast<int>(best);
  }
  return out;
}

double accuracy_from_scores(const Tensor& scores, std::span<const int> labels) {
  if (scores.rows() != labels.size()) throw ShapeError("accuracy: label count mismatch");
  if (labels.empty()) throw ShapeError("accuracy of an empty set is undefined");
  const auto pred = argmax_rows(scores);
  std::size_t hit = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hit += pred[i] == labels[i];
  return static_cast<double>(hit) / static_cast<double>(labels.size());
}

}  // namespace shiftbench
