#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

#include "shiftbench/losses.hpp"
#include "shiftbench/training.hpp"

namespace shiftbench::adv {

/// Identity forward; backward returns -lambda_d * upstream.
std::pair<Tensor, Tensor> grl_forward_backward(const Tensor& x, const Tensor& upstream,
                                               double lambda_d);

/// Binary cross-entropy of probabilities `probs` (n x 1) against labels in
/// {0, 1}, averaged within each label group and summed over the two groups.
/// Probabilities are clipped to [1e-12, 1 - 1e-12]. The gradient is w.r.t.
/// the probabilities. Throws ShapeError when either group is empty.
LossResult domain_bce_loss(const Tensor& probs, std::span<const int> labels);

/// Discriminator objective: source features (mapped by M_s) are real (1),
/// target features (mapped by M_t) fake (0). Gradient rows follow the
/// stacked [source; target] order.
LossResult adda_discriminator_loss(const Tensor& d_source, const Tensor& d_target);

/// Mapping objective with inverted labels: -mean log D(M_t(x_t)).
LossResult adda_mapping_loss(const Tensor& d_target);

struct ProbeConfig {
  std::size_t epochs = 200;
  double learning_rate = 0.5;
  std::uint64_t seed = 7;
};

/// Proxy H-divergence 2(1 - min(E, 2 - E)) where E = err_s + err_t is the
/// held-out error of a logistic probe separating the two feature sets. Each
/// side is split 50/50 into probe training and held-out halves. Needs at
/// least 10 rows per side.
double empirical_h_divergence(const Tensor& features_s, const Tensor& features_t,
                              const ProbeConfig& probe = {});

struct DannConfig {
  std::size_t attach = 0;                         // G_f = layers [0, attach)
  std::vector<std::size_t> domain_hidden{16};     // G_d hidden widths
  double lambda_d = 0.1;

  void validate(const NetworkSpec& classifier) const;
};

struct DannModel {
  Model gf, gy, gd;
};

/// Splits a classifier into G_f/G_y and adds a freshly initialized G_d
/// (gradient reversal, hidden relu layers, one sigmoid output).
DannModel make_dann(const Model& classifier, const DannConfig& cfg, std::uint64_t seed);

/// G_y(G_f(x)) as a single model.
Model dann_classifier(const DannModel& m);
Tensor dann_features(const DannModel& m, const Tensor& x);

struct DannResult {
  DannModel model;
  MetricsLog log;
  double source_accuracy = 0.0;
  double target_accuracy = 0.0;
};

/// Source rows feed G_y; both domains feed G_d through the reversal layer
/// with labels 0 (source) and 1 (target). One SGD step per iteration on
/// every piece.
DannResult dann_train(DannModel model, const Dataset& source, const Dataset& target,
                      const DannConfig& dcfg, const TrainConfig& cfg);

enum class AddaPhase { fresh = 0, pretrained = 1, adapted = 2 };

struct AddaConfig {
  std::size_t split = 0;  // M_s = classifier layers [0, split)
  std::vector<std::size_t> disc_hidden{64, 128, 192};

  void validate(const NetworkSpec& classifier) const;
};

struct AddaState {
  Model ms, c, mt, d;
  AddaPhase phase = AddaPhase::fresh;
};

/// Carves M_s/C from `classifier`, initializes D; M_t is set at adaptation.
AddaState make_adda(const Model& classifier, const AddaConfig& cfg, std::uint64_t seed);

/// Phase 1: supervised training of C(M_s(x)).
SourceOnlyResult adda_pretrain(AddaState& state, const Dataset& source, const Dataset& target,
                               const TrainConfig& cfg);

struct AddaAdaptResult {
  MetricsLog log;  // epoch, d_loss, m_loss, d_acc, target_acc
  std::vector<double> d_accuracy;  // per epoch, training batches
};

/// Phase 2: M_t <- M_s, then alternate one D step and one M_t step per
/// iteration. M_s and C are read only.
AddaAdaptResult adda_adapt(AddaState& state, const Dataset& source, const Dataset& target,
                           const TrainConfig& d_cfg, const TrainConfig& m_cfg);

/// Phase 3: accuracy of C(M_t(x)). Requires an adapted state.
double adda_test(const AddaState& state, const Dataset& target);
/// C(M_s(x)) on the same data; the no-adaptation reference.
double adda_source_baseline(const AddaState& state, const Dataset& target);

/// Accuracy of D at telling M_s(x_s) (real) from M_t(x_t) (fake).
double adda_discriminator_accuracy(const AddaState& state, const Tensor& xs, const Tensor& xt);

/// Phase checkpoints: <dir>/phase1.ckpt holds M_s and C, <dir>/phase2.ckpt
/// holds M_t and D.
void save_adda(const AddaState& state, const std::filesystem::path& dir);
/// Fills `state` (built by make_adda with the same config) from the phase
/// checkpoints found in `dir`. Throws IoError when phase 1 is missing.
void load_adda(AddaState& state, const std::filesystem::path& dir);

}  // namespace shiftbench::adv
