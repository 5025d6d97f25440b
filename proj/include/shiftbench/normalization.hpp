#pragma once

#include <cstddef>
#include <vector>

#include "shiftbench/tensor.hpp"

// Column-statistics kernels shared by batchnorm and the domain-alignment
// layer. Both layers go through the same arithmetic so that a DA-layer with
// alpha = 1 reproduces per-domain batchnorm bit for bit.
namespace shiftbench::autodial {

struct Moments {
  std::vector<double> mean;
  std::vector<double> var;  // biased: mean of squared deviations
};

/// Per-column mean and variance over rows [begin, end).
Moments column_moments(const Tensor& x, std::size_t begin, std::size_t end);

/// Moments of the mixture alpha*p + (1-alpha)*q:
///   mean = alpha*mu_p + (1-alpha)*mu_q
///   var  = alpha*v_p + (1-alpha)*v_q + alpha*(1-alpha)*(mu_p - mu_q)^2
Moments mix_moments(const Moments& p, const Moments& q, double alpha);

std::vector<double> inverse_std(const std::vector<double>& var, double eps);

/// out rows [begin, end) = (x - mean) * inv_std.
void normalize_rows(const Tensor& x, std::size_t begin, std::size_t end,
                    const std::vector<double>& mean, const std::vector<double>& inv_std,
                    Tensor& out);

/// Gradients of a loss w.r.t. the mean and variance used to normalize rows
/// [begin, end), given g = dL/d(normalized) on those rows. Also writes the
/// direct term g * inv_std into dx.
void normalization_backward(const Tensor& g, const Tensor& x, std::size_t begin, std::size_t end,
                            const std::vector<double>& mean, const std::vector<double>& inv_std,
                            Tensor& dx, std::vector<double>& dmean, std::vector<double>& dvar);

/// Pushes gradients w.r.t. a domain's own column moments back onto its rows:
/// dx += dmean/n + dvar * 2 (x - mean)/n.
void moments_backward(const Tensor& x, std::size_t begin, std::size_t end,
                      const std::vector<double>& mean, const std::vector<double>& dmean,
                      const std::vector<double>& dvar, Tensor& dx);

}  // namespace shiftbench::autodial
