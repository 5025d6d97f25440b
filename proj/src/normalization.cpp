#include "shiftbench/normalization.hpp"

#include <cmath>

#include "shiftbench/error.hpp"

namespace shiftbench::autodial {

Moments column_moments(const Tensor& x, std::size_t begin, std::size_t end) {
  if (begin >= end || end > x.rows()) throw ShapeError("column_moments: empty row range");
  const std::size_t cols = x.cols();
  const double n = static_cast<double>(end - begin);
  Moments m{std::vector<double>(cols, 0.0), std::vector<double>(cols, 0.0)};
  for (std::size_t r = begin; r < end; ++r) {
    auto row = x.row(r);
    for (std::size_t c = 0; c < cols; ++c) m.mean[c] += row[c];
  }
  for (auto& v : m.mean) v /= n;
  for (std::size_t r = begin; r < end; ++r) {
    auto row = x.row(r);
    for (std::size_t c = 0; c < cols; ++c) {
      const double d = row[c] - m.mean[c];
      m.var[c] += d * d;
    }
  }
  for (auto& v : m.var) v /= n;
  return m;
}

Moments mix_moments(const Moments& p, const Moments& q, double alpha) {
  const std::size_t cols = p.mean.size();
  Moments m{std::vector<double>(cols), std::vector<double>(cols)};
  const double beta = 1.0 - alpha;
  for (std::size_t c = 0; c < cols; ++c) {
    const double d = p.mean[c] - q.mean[c];
    m.mean[c] = alpha * p.mean[c] + beta * q.mean[c];
    m.var[c] = alpha * p.var[c] + beta * q.var[c] + alpha * beta * d * d;
  }
  return m;
}

std::vector<double> inverse_std(const std::vector<double>& var, double eps) {
  std::vector<double> inv(var.size());
  for (std::size_t c = 0; c < var.size(); ++c) {
    const double denom = eps + var[c];
    if (!(denom > 0.0)) throw NumericError("normalization variance + eps must be positive");
    inv[c] = 1.0 / std::sqrt(denom);
  }
  return inv;
}

void normalize_rows(const Tensor& x, std::size_t begin, std::size_t end,
                    const std::vector<double>& mean, const std::vector<double>& inv_std,
                    Tensor& out) {
  const std::size_t cols = x.cols();
  for (std::size_t r = begin; r < end; ++r) {
    auto in = x.row(r);
    auto o = out.row(r);
    for (std::size_t c = 0; c < cols; ++c) o[c] = (in[c] - mean[c]) * inv_std[c];
  }
}

void normalization_backward(const Tensor& g, const Tensor& x, std::size_t begin, std::size_t end,
                            const std::vector<double>& mean, const std::vector<double>& inv_std,
                            Tensor& dx, std::vector<double>& dmean, std::vector<double>& dvar) {
  const std::size_t cols = x.cols();
  dmean.assign(cols, 0.0);
  dvar.assign(cols, 0.0);
  for (std::size_t r = begin; r < end; ++r) {
    auto gr = g.row(r);
    auto xr = x.row(r);
    auto dr = dx.row(r);
    for (std::size_t c = 0; c < cols; ++c) {
      dr[c] = gr[c] * inv_std[c];
      dmean[c] -= gr[c] * inv_std[c];
      dvar[c] += gr[c] * (xr[c] - mean[c]);
    }
  }
  for (std::size_t c = 0; c < cols; ++c) {
    dvar[c] *= -0.5 * inv_std[c] * inv_std[c] * inv_std[c];
  }
}

void moments_backward(const Tensor& x, std::size_t begin, std::size_t end,
                      const std::vector<double>& mean, const std::vector<double>& dmean,
                      const std::vector<double>& dvar, Tensor& dx) {
  const std::size_t cols = x.cols();
  const double n = static_cast<double>(end - begin);
  for (std::size_t r = begin; r < end; ++r) {
    auto xr = x.row(r);
    auto dr = dx.row(r);
    for (std::size_t c = 0; c < cols; ++c) {
      dr[c] += dmean[c] / n + dvar[c] * 2.0 * (xr[c] - mean[c]) / n;
    }
  }
}

}  // namespace shiftbench::autodial
