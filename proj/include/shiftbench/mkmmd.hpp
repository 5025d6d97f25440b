#pragma once

#include <span>
#include <vector>

#include "shiftbench/training.hpp"

namespace shiftbench::mmd {

/// Convex combination of Gaussian kernels k_u(x, y) = exp(-||x - y||^2 / gamma_u).
struct KernelBank {
  std::vector<double> gammas;
  std::vector<double> betas;  // on the simplex

  static KernelBank uniform(std::vector<double> gammas);
  std::size_t size() const { return gammas.size(); }
  void validate() const;
};

inline constexpr double kDefaultMultipliers[] = {0.25, 0.5, 1.0, 2.0, 4.0};

double gaussian_kernel(std::span<const double> x, std::span<const double> y, double gamma);

/// Median of squared pairwise distances over the pooled rows (capped at the
/// first `max_rows` of each side), times each multiplier. Uniform weights.
KernelBank median_heuristic_bank(const Tensor& source, const Tensor& target,
                                 std::span<const double> multipliers = kDefaultMultipliers,
                                 std::size_t max_rows = 200);

struct LinearMmd {
  double value = 0.0;
  Tensor grad_source;  // d value / d source rows (zero for truncated rows)
  Tensor grad_target;
  Tensor g_values;     // m x T: per-kernel g_{k_u}(z_i) for each quad-tuple
  std::size_t used = 0;  // samples per domain that formed tuples
};

/// Linear-time unbiased MK-MMD: (2/n) * sum over quad-tuples
/// z_i = (s_{2i-1}, s_{2i}, t_{2i-1}, t_{2i}) of
/// g(z_i) = k(s1, s2) + k(t1, t2) - k(s1, t2) - k(s2, t1).
/// Both sides are truncated to the smaller, even count; fewer than two
/// rows on either side is a ShapeError.
LinearMmd mmd_linear(const KernelBank& bank, const Tensor& source, const Tensor& target);

/// Unbiased quadratic-time U-statistic over all pairs. Independent check
/// for mmd_linear.
double mmd_quadratic_oracle(const KernelBank& bank, const Tensor& source, const Tensor& target);

/// Q_{uu'} = (4/n) sum_i dg_u(i) dg_u'(i), where dg_u(i) is the difference of
/// g_u over consecutive tuples (z_{2i-1}, z_{2i}) and n = 2T is the sample
/// count behind the T tuples in `g_values` (m x T).
Tensor variance_q(const Tensor& g_values);

struct BetaQp {
  std::vector<double> qp_beta;    // minimizer with d^T beta = 1, beta >= 0
  std::vector<double> bank_beta;  // qp_beta rescaled onto the simplex
  double objective = 0.0;         // qp_beta^T (Q + eps I) qp_beta
  double stationarity = 0.0;      // KKT residuals, max-abs
  double complementarity = 0.0;
  double primal = 0.0;
  bool fallback = false;          // no kernel had d_u > 0; uniform weights returned
};

/// min beta^T (Q + eps I) beta  s.t. d^T beta = 1, beta >= 0, solved by
/// enumerating supports (m <= 16).
BetaQp beta_qp(std::span<const double> d, const Tensor& q, double eps = 1e-3);

struct DanConfig {
  std::vector<std::size_t> adapted_layers;  // output of these layers is aligned
  double lambda = 1.0;
  std::size_t beta_cadence = 0;  // iterations between beta updates; 0 = once per epoch
  double qp_eps = 1e-3;
  std::vector<double> bandwidth_multipliers{std::begin(kDefaultMultipliers),
                                            std::end(kDefaultMultipliers)};

  void validate(const NetworkSpec& net) const;
};

/// Last hidden activation and the output logits.
std::vector<std::size_t> default_adapted_layers(const NetworkSpec& net);

struct DanResult {
  Model model;
  MetricsLog log;
  std::vector<KernelBank> banks;  // final bank per adapted layer
  double source_accuracy = 0.0;
  double target_accuracy = 0.0;
};

/// Cross-entropy on source plus lambda * MK-MMD between source and target
/// representations on each adapted layer. Kernel weights are re-solved from
/// the accumulated tuples every `beta_cadence` iterations.
DanResult dan_train(Model model, const Dataset& source, const Dataset& target,
                    const DanConfig& dan, const TrainConfig& cfg);

}  // namespace shiftbench::mmd
