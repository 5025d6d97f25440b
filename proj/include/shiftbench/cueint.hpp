#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "shiftbench/training.hpp"

namespace shiftbench::cue {

/// Per-sample feature rows of one cue ("rgb", "depth", or a concatenation),
/// aligned by sample id.
struct FeatureSet {
  Tensor x;
  std::string cue;
  std::vector<std::string> ids;
  std::vector<int> labels;  // may be empty

  std::size_t size() const { return ids.size(); }
  void validate() const;
};

/// Output of layer `layer` (0-based) in eval mode. When `layer` is empty the
/// input of the final layer is used, i.e. the last activation before the
/// classifier.
FeatureSet extract_features(const Model& net, const Dataset& data, std::string cue,
                            std::optional<std::size_t> layer = std::nullopt,
                            Domain domain = Domain::target);

/// Rows [w0 * a | w1 * b]. Throws ShapeError naming the first id that differs.
FeatureSet concat_cues(const FeatureSet& a, const FeatureSet& b, std::array<double, 2> weights = {1.0, 1.0});

struct SvmConfig {
  double c = 1.0;
  std::size_t epochs = 50;

  void validate() const;
};

/// One-vs-rest linear SVM. Row z of `w` and b[z] score class z.
struct CueIntegrationModel {
  std::vector<double> cue_weights{1.0, 1.0};
  Tensor w;                         // classes x dim
  std::vector<double> b;
  std::vector<double> objective;    // per epoch, summed over the binary problems

  std::size_t classes() const { return b.size(); }
  std::size_t dim() const { return w.cols(); }
};

/// Minimizes (1/2C)||w||^2 + mean hinge per class by full-batch subgradient
/// steps of size C/t (t = epoch, 1-based), one step per epoch; the bias is
/// not regularized. The iterate with the lowest objective is kept. Labels
/// must cover at least two classes.
CueIntegrationModel svm_train(const Tensor& x, std::span<const int> labels, std::size_t num_classes,
                              const SvmConfig& cfg = {});

/// Objective of one binary problem (labels +1/-1), as minimized by svm_train.
double svm_binary_objective(std::span<const double> w, double b, const Tensor& x,
                            std::span<const int> signs, double c);

struct SvmSubgradient {
  std::vector<double> w;
  double b = 0.0;
};

/// Subgradient of svm_binary_objective; margins exactly at 1 count as
/// inactive.
SvmSubgradient svm_binary_subgradient(std::span<const double> w, double b, const Tensor& x,
                                      std::span<const int> signs, double c);

struct SvmPrediction {
  std::vector<int> labels;
  Tensor scores;  // n x classes
};

SvmPrediction svm_predict(const CueIntegrationModel& m, const Tensor& x);

struct RgbdConfig {
  std::array<double, 2> cue_weights{1.0, 1.0};
  SvmConfig svm;
  std::optional<std::size_t> layer;
  double max_null_fraction = 0.75;  // depth samples above this are dropped with their RGB partner
};

struct RgbdResult {
  double combined_accuracy = 0.0;
  double rgb_accuracy = 0.0;
  double depth_accuracy = 0.0;
  std::size_t source_used = 0, target_used = 0;
};

/// Extracts both cues on source and target, concatenates them, trains the
/// SVM on source and scores target. Per-cue SVMs give the reference numbers.
/// Datasets of the two cues must share ids and labels.
RgbdResult rgbd_pipeline(const Model& rgb_net, const Model& depth_net, const Dataset& source_rgb,
                         const Dataset& source_depth, const Dataset& target_rgb,
                         const Dataset& target_depth, const RgbdConfig& cfg = {});

/// Feature persistence: flat tensor checkpoint plus "<path>.ids.csv" with
/// "id,label" rows.
void save_features(const std::filesystem::path& path, const FeatureSet& f);
FeatureSet load_features(const std::filesystem::path& path);

}  // namespace shiftbench::cue
