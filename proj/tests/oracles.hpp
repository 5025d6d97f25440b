#pragma once

// Brute-force reference computations shared by the unit tests and the
// acceptance runner.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "shiftbench/cueint.hpp"
#include "shiftbench/depthcolor.hpp"
#include "shiftbench/rng.hpp"
#include "shiftbench/tensor.hpp"

namespace oracle {

using namespace shiftbench;

// Per-column batch normalization written out longhand (affine off).
inline Tensor batch_norm(const Tensor& x, double eps) {
  Tensor out = x;
  for (std::size_t c = 0; c < x.cols(); ++c) {
    double m = 0.0;
    for (std::size_t r = 0; r < x.rows(); ++r) m += x(r, c);
    m /= double(x.rows());
    double v = 0.0;
    for (std::size_t r = 0; r < x.rows(); ++r) v += (x(r, c) - m) * (x(r, c) - m);
    v /= double(x.rows());
    for (std::size_t r = 0; r < x.rows(); ++r) out(r, c) = (x(r, c) - m) / std::sqrt(v + eps);
  }
  return out;
}

// Straightforward 2-D truncated Gaussian with replicated borders.
inline depth::FloatImage gaussian(const depth::FloatImage& img, double sigma) {
  const long r = static_cast<long>(std::ceil(3.0 * sigma));
  auto clamp = [](long v, std::size_t n) { return static_cast<std::size_t>(std::clamp<long>(v, 0, long(n) - 1)); };
  depth::FloatImage out(img.width, img.height);
  for (std::size_t y = 0; y < img.height; ++y) {
    for (std::size_t x = 0; x < img.width; ++x) {
      double num = 0.0, den = 0.0;
      for (long dy = -r; dy <= r; ++dy) {
        for (long dx = -r; dx <= r; ++dx) {
          const double w = std::exp(-double(dx * dx + dy * dy) / (2 * sigma * sigma));
          num += w * img.at(clamp(long(x) + dx, img.width), clamp(long(y) + dy, img.height));
          den += w;
        }
      }
      out.at(x, y) = num / den;
    }
  }
  return out;
}

// One-dimensional binary problem, so (w, b) lives on a plane.
struct Line {
  Tensor x;
  std::vector<int> signs;

  std::vector<int> labels() const {
    std::vector<int> l;
    for (int s : signs) l.push_back(s > 0 ? 1 : 0);
    return l;
  }
};

inline Line noisy_line(std::uint64_t seed, std::size_t n) {
  Rng rng(seed);
  Line l{Tensor::matrix(n, 1), {}};
  for (std::size_t i = 0; i < n; ++i) {
    const int s = i % 2 ? 1 : -1;
    l.x(i, 0) = 0.8 * s + 0.3 + rng.normal(0.0, 0.7);
    l.signs.push_back(s);
  }
  return l;
}

// Coarse-to-fine grid minimum of the binary SVM objective.
inline double svm_grid_minimum(const Line& l, double c) {
  double cw = 0.0, cb = 0.0, span = 8.0, best = std::numeric_limits<double>::infinity();
  for (int level = 0; level < 6; ++level) {
    double bw = cw, bb = cb;
    for (int i = -100; i <= 100; ++i) {
      for (int j = -100; j <= 100; ++j) {
        const double w = cw + span * i / 100.0, b = cb + span * j / 100.0;
        const std::vector<double> wv{w};
        const double v = cue::svm_binary_objective(wv, b, l.x, l.signs, c);
        if (v < best) {
          best = v;
          bw = w;
          bb = b;
        }
      }
    }
    cw = bw;
    cb = bb;
    span /= 10.0;
  }
  return best;
}

}  // namespace oracle
