#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "shiftbench/losses.hpp"
#include "shiftbench/normalization.hpp"
#include "shiftbench/training.hpp"

namespace shiftbench::autodial {

/// alpha = 0.5 + 0.5 * sigmoid(rho), so alpha stays inside (0.5, 1).
double alpha_from_rho(double rho);
double dalpha_drho(double rho);
/// Inverse of alpha_from_rho for alpha in (0.5, 1).
double rho_from_alpha(double alpha);

/// Standalone state of one domain-alignment layer.
struct DaLayerState {
  double rho = 0.0;
  std::optional<double> pinned_alpha;
  double eps = 1e-5;
  bool affine = true;
  Tensor scale;  // empty = ones
  Tensor shift;  // empty = zeros
  double momentum = 0.1;
  // running mixed moments, empty until the first train-mode call
  Tensor running_mean_st, running_var_st, running_mean_ts, running_var_ts;

  double alpha() const { return pinned_alpha ? *pinned_alpha : alpha_from_rho(rho); }
};

/// Train mode: source rows normalized by the alpha-mixed source/target
/// moments (mu_st, var_st), target rows by the mirrored mixture (mu_ts,
/// var_ts); running moments are updated. Eval mode: source rows use the
/// running st-moments and target rows the running ts-moments; either half
/// may be empty.
std::pair<Tensor, Tensor> da_layer_forward(const Tensor& source, const Tensor& target,
                                           DaLayerState& state, Mode mode);

/// Mean Shannon entropy of the rows of `probs` (0 log 0 := 0). The gradient
/// is w.r.t. the pre-softmax logits.
LossResult entropy_loss(const Tensor& probs);

struct AutodialConfig {
  double lambda = 0.1;  // target entropy weight
  bool affine = true;
  double momentum = 0.1;
  double initial_rho = 0.0;
  std::optional<double> pinned_alpha;

  void validate() const;
};

/// MLP with a da-layer after every hidden linear layer:
/// linear, da, relu, ..., linear.
NetworkSpec autodial_network(std::size_t in, std::span<const std::size_t> hidden,
                             std::size_t classes, const AutodialConfig& cfg);

/// Same topology with batchnorm where autodial_network has da-layers; the
/// source-only counterpart that an alpha = 1 network degenerates to.
NetworkSpec batchnorm_network(std::size_t in, std::span<const std::size_t> hidden,
                              std::size_t classes, const AutodialConfig& cfg);

struct AutodialResult {
  Model model;
  MetricsLog log;
  std::vector<std::vector<double>> alpha_trace;  // per iteration, one entry per da-layer
  double source_accuracy = 0.0;
  double target_accuracy = 0.0;
};

/// Minimizes source cross-entropy + lambda * target prediction entropy with
/// shared weights across the two branches. Batches stack source rows over
/// target rows so every da-layer sees both halves.
AutodialResult autodial_train(Model model, const Dataset& source, const Dataset& target,
                              const AutodialConfig& acfg, const TrainConfig& cfg);

}  // namespace shiftbench::autodial
