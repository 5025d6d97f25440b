#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "shiftbench/nn.hpp"
#include "shiftbench/optim.hpp"
#include "shiftbench/rng.hpp"

namespace shiftbench {

/// In-memory labeled samples plus the metadata the protocol filters on.
/// Target-domain labels are only read by evaluation code.
struct Dataset {
  Tensor x;                         // n x d features
  std::vector<int> y;               // class per row
  std::size_t num_classes = 0;
  std::vector<std::string> ids;     // unique sample ids
  std::vector<std::string> instances;
  std::vector<double> distance_mm;  // median object distance, 0 when unknown
  std::vector<double> null_fraction;

  std::size_t size() const { return y.size(); }
  std::size_t dim() const { return x.cols(); }
  /// Throws ShapeError when the per-row vectors disagree in length.
  void validate() const;
  /// Rows picked by index; metadata follows.
  Dataset subset(std::span<const std::size_t> idx) const;
};

/// Mini-batch index stream. Shuffles with its own seed and reshuffles at
/// every epoch boundary. Batches never straddle an epoch.
class BatchSampler {
 public:
  BatchSampler(std::size_t n, std::size_t batch, std::uint64_t seed);
  std::vector<std::size_t> next();
  std::size_t batches_per_epoch() const { return n_ / batch_; }

 private:
  void reshuffle();
  std::size_t n_, batch_;
  Rng rng_;
  std::vector<std::size_t> order_;
  std::size_t pos_ = 0;
};

struct TrainConfig {
  std::size_t epochs = 30;
  std::size_t batch_size = 32;  // per domain
  LrSchedule lr{LrPolicy::inverse, 0.01, 0.001, 0.75, 1.0};
  double momentum = 0.9;
  double weight_decay = 0.0;
  std::uint64_t seed = 7;

  void validate() const;
  OptimizerState optimizer() const { return make_optimizer(lr, momentum, weight_decay); }
};

/// Seed streams. Trainers draw every random quantity from one of these so
/// that two algorithms sharing a seed see identical initial weights and
/// source batch order.
namespace streams {
inline constexpr std::uint64_t source_batches = 1;
inline constexpr std::uint64_t target_batches = 2;
std::uint64_t init(Role role);
}  // namespace streams

/// Per-epoch metric rows, written as CSV.
struct MetricsLog {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
  std::vector<std::string> notes;  // warnings and diagnostics

  void write_csv(std::ostream& os) const;
  /// Column by name; throws ConfigError when absent.
  std::vector<double> column(std::string_view name) const;
};

/// A trained single-piece classifier (network, weights, running moments).
struct Model {
  NetworkSpec spec;
  Parameters params;
  Buffers buffers;
};

Model make_model(NetworkSpec spec, std::uint64_t seed);

/// Splits a model before layer `at`; parameters and buffers are renamed to
/// the new roles. Used to carve G_f/G_y (or M_s/C) out of one initialized
/// classifier so every algorithm starts from the same weights.
std::pair<Model, Model> split_model(const Model& model, std::size_t at, Role first, Role second);

/// Same network and tensors under another role (names are re-prefixed).
Model with_role(const Model& model, Role role);

/// Inverse of split_model.
Model compose_models(const Model& first, const Model& second, Role role);

double evaluate_accuracy(const Model& model, const Dataset& data, Domain domain);

struct SourceOnlyResult {
  Model model;
  MetricsLog log;
  double source_accuracy = 0.0;
  double target_accuracy = 0.0;
};

/// Plain supervised training on the source set. `target` is only used for
/// the per-epoch evaluation column; pass the source set when there is none.
SourceOnlyResult train_source_only(Model model, const Dataset& source, const Dataset& target,
                                   const TrainConfig& cfg);

/// Throws TrainingError with a diagnostic when a loss went NaN/Inf.
void check_loss(double value, std::string_view what, std::size_t epoch, std::size_t iteration);

/// Concatenates the rows of the two batches; the source block comes first.
Tensor stack_domains(const Tensor& source, const Tensor& target);

}  // namespace shiftbench
