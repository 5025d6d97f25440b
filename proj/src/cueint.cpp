#include "shiftbench/cueint.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "shiftbench/checkpoint.hpp"
#include "shiftbench/error.hpp"
#include "shiftbench/losses.hpp"

namespace shiftbench::cue {

void FeatureSet::validate() const {
  if (x.rows() != ids.size() && !(ids.empty() && x.empty())) {
    throw ShapeError("feature set '" + cue + "' has " + std::to_string(x.rows()) + " rows but " +
                     std::to_string(ids.size()) + " ids");
  }
  if (!labels.empty() && labels.size() != ids.size()) {
    throw ShapeError("feature set '" + cue + "' label count mismatch");
  }
  x.check_finite("features of cue " + cue);
}

FeatureSet extract_features(const Model& net, const Dataset& data, std::string cue,
                            std::optional<std::size_t> layer, Domain domain) {
  const std::size_t n_layers = net.spec.layers.size();
  std::size_t last;
  if (layer) {
    if (*layer >= n_layers) {
      throw ShapeError("feature layer " + std::to_string(*layer) + " out of range (network has " +
                       std::to_string(n_layers) + " layers)");
    }
    last = *layer;
  } else {
    if (n_layers < 2) throw ShapeError("network too shallow for penultimate features");
    last = n_layers - 2;
  }
  if (data.size() == 0) throw ShapeError("cannot extract features from an empty dataset");
  NetworkSpec head = net.spec;
  head.layers.resize(last + 1);
  FeatureSet f;
  f.x = predict(head, net.params, net.buffers, data.x, domain);
  f.cue = std::move(cue);
  f.ids = data.ids;
  f.labels = data.y;
  f.validate();
  return f;
}

FeatureSet concat_cues(const FeatureSet& a, const FeatureSet& b, std::array<double, 2> weights) {
  if (a.size() != b.size()) {
    throw ShapeError("cue sizes differ: " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  }
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a.ids[i] != b.ids[i]) {
      throw ShapeError("cue ids misaligned at row " + std::to_string(i) + ": '" + a.ids[i] + "' vs '" +
                       b.ids[i] + "'");
    }
  }
  FeatureSet out;
  out.cue = a.cue + "+" + b.cue;
  out.ids = a.ids;
  out.labels = a.labels.empty() ? b.labels : a.labels;
  const std::size_t da = a.x.cols(), db = b.x.cols();
  out.x = Tensor::matrix(a.size(), da + db);
  for (std::size_t r = 0; r < a.size(); ++r) {
    for (std::size_t c = 0; c < da; ++c) out.x(r, c) = weights[0] * a.x(r, c);
    for (std::size_t c = 0; c < db; ++c) out.x(r, da + c) = weights[1] * b.x(r, c);
  }
  return out;
}

void SvmConfig::validate() const {
  if (!(c > 0.0)) throw ConfigError("svm.C: must be positive");
  if (epochs == 0) throw ConfigError("svm.epochs: must be positive");
}

double svm_binary_objective(std::span<const double> w, double b, const Tensor& x,
                            std::span<const int> signs, double c) {
  double reg = 0.0;
  for (double v : w) reg += v * v;
  double hinge = 0.0;
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto xr = x.row(r);
    double s = b;
    for (std::size_t k = 0; k < w.size(); ++k) s += w[k] * xr[k];
    hinge += std::max(0.0, 1.0 - signs[r] * s);
  }
  return reg / (2.0 * c) + hinge / static_cast<double>(x.rows());
}

SvmSubgradient svm_binary_subgradient(std::span<const double> w, double b, const Tensor& x,
                                     std::span<const int> signs, double c) {
  SvmSubgradient g;
  g.w.assign(w.size(), 0.0);
  const double inv_n = 1.0 / static_cast<double>(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    auto xi = x.row(i);
    double s = b;
    for (std::size_t k = 0; k < w.size(); ++k) s += w[k] * xi[k];
    if (signs[i] * s < 1.0) {
      for (std::size_t k = 0; k < w.size(); ++k) g.w[k] -= signs[i] * xi[k] * inv_n;
      g.b -= signs[i] * inv_n;
    }
  }
  for (std::size_t k = 0; k < w.size(); ++k) g.w[k] += w[k] / c;
  return g;
}

CueIntegrationModel svm_train(const Tensor& x, std::span<const int> labels, std::size_t num_classes,
                              const SvmConfig& cfg) {
  cfg.validate();
  if (x.rows() != labels.size()) throw ShapeError("svm_train: label count mismatch");
  if (x.rows() == 0) throw ShapeError("svm_train: no samples");
  x.check_finite("svm features");
  std::vector<std::size_t> counts(num_classes, 0);
  for (int l : labels) {
    if (l < 0 || static_cast<std::size_t>(l) >= num_classes) {
      throw ShapeError("svm_train: label " + std::to_string(l) + " out of range");
    }
    ++counts[static_cast<std::size_t>(l)];
  }
  std::size_t present = 0;
  for (auto c : counts) present += c > 0 ? 1 : 0;
  if (present < 2) throw ShapeError("svm_train: labels cover a single class");

  const std::size_t n = x.rows(), d = x.cols();
  const double lambda = 1.0 / cfg.c;
  CueIntegrationModel m;
  m.w = Tensor::matrix(num_classes, d);
  m.b.assign(num_classes, 0.0);
  m.objective.assign(cfg.epochs, 0.0);
  std::vector<int> signs(n);
  for (std::size_t z = 0; z < num_classes; ++z) {
    for (std::size_t i = 0; i < n; ++i) signs[i] = labels[i] == static_cast<int>(z) ? 1 : -1;
    std::vector<double> w(d, 0.0), best_w = w;
    double b = 0.0, best_b = 0.0;
    double best = svm_binary_objective(w, b, x, signs, cfg.c);
    for (std::size_t t = 1; t <= cfg.epochs; ++t) {
      const auto g = svm_binary_subgradient(w, b, x, signs, cfg.c);
      const double eta = 1.0 / (lambda * static_cast<double>(t));
      for (std::size_t k = 0; k < d; ++k) w[k] -= eta * g.w[k];
      b -= eta * g.b;
      const double obj = svm_binary_objective(w, b, x, signs, cfg.c);
      if (obj < best) {
        best = obj;
        best_w = w;
        best_b = b;
      }
      m.objective[t - 1] += obj;
    }
    for (std::size_t k = 0; k < d; ++k) m.w(z, k) = best_w[k];
    m.b[z] = best_b;
  }
  return m;
}

SvmPrediction svm_predict(const CueIntegrationModel& m, const Tensor& x) {
  if (x.cols() != m.dim()) {
    throw ShapeError("svm_predict: feature dim " + std::to_string(x.cols()) + " does not match model dim " +
                     std::to_string(m.dim()));
  }
  SvmPrediction p;
  p.scores = matmul_transposed(x, m.w);
  for (std::size_t r = 0; r < p.scores.rows(); ++r) {
    for (std::size_t z = 0; z < m.classes(); ++z) p.scores(r, z) += m.b[z];
  }
  p.labels = argmax_rows(p.scores);
  return p;
}

namespace {

double svm_accuracy(const FeatureSet& train, const FeatureSet& test, std::size_t classes,
                    const SvmConfig& cfg) {
  const auto model = svm_train(train.x, train.labels, classes, cfg);
  const auto pred = svm_predict(model, test.x);
  std::size_t right = 0;
  for (std::size_t i = 0; i < test.size(); ++i) right += pred.labels[i] == test.labels[i] ? 1 : 0;
  return static_cast<double>(right) / static_cast<double>(test.size());
}

// Drops depth samples with too many null pixels together with their RGB partner.
std::pair<Dataset, Dataset> aligned_pair(const Dataset& rgb, const Dataset& depth, double max_null,
                                         const char* which) {
  if (rgb.size() != depth.size()) {
    throw ShapeError(std::string(which) + ": rgb and depth sets differ in size");
  }
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < depth.size(); ++i) {
    if (rgb.ids[i] != depth.ids[i]) {
      throw ShapeError(std::string(which) + ": cue ids misaligned at '" + rgb.ids[i] + "'");
    }
    if (!(depth.null_fraction[i] > max_null)) keep.push_back(i);
  }
  return {rgb.subset(keep), depth.subset(keep)};
}

}  // namespace

RgbdResult rgbd_pipeline(const Model& rgb_net, const Model& depth_net, const Dataset& source_rgb,
                         const Dataset& source_depth, const Dataset& target_rgb,
                         const Dataset& target_depth, const RgbdConfig& cfg) {
  auto [srgb, sdep] = aligned_pair(source_rgb, source_depth, cfg.max_null_fraction, "source");
  auto [trgb, tdep] = aligned_pair(target_rgb, target_depth, cfg.max_null_fraction, "target");
  if (srgb.size() == 0) throw ShapeError("rgbd: no usable source samples");
  if (trgb.size() == 0) throw ShapeError("rgbd: no usable target samples");
  const std::size_t classes = std::max(srgb.num_classes, sdep.num_classes);

  const auto fs_rgb = extract_features(rgb_net, srgb, "rgb", cfg.layer, Domain::source);
  const auto fs_dep = extract_features(depth_net, sdep, "depth", cfg.layer, Domain::source);
  const auto ft_rgb = extract_features(rgb_net, trgb, "rgb", cfg.layer, Domain::target);
  const auto ft_dep = extract_features(depth_net, tdep, "depth", cfg.layer, Domain::target);

  RgbdResult res;
  res.source_used = srgb.size();
  res.target_used = trgb.size();
  res.combined_accuracy = svm_accuracy(concat_cues(fs_rgb, fs_dep, cfg.cue_weights),
                                       concat_cues(ft_rgb, ft_dep, cfg.cue_weights), classes, cfg.svm);
  res.rgb_accuracy = svm_accuracy(fs_rgb, ft_rgb, classes, cfg.svm);
  res.depth_accuracy = svm_accuracy(fs_dep, ft_dep, classes, cfg.svm);
  return res;
}

void save_features(const std::filesystem::path& path, const FeatureSet& f) {
  f.validate();
  Checkpoint ck;
  ck.phase = "features-" + f.cue;
  ck.tensors.add("features", f.x);
  save_checkpoint(path, ck);
  std::ofstream ids(path.string() + ".ids.csv");
  if (!ids) throw IoError("cannot write " + path.string() + ".ids.csv");
  ids << "id,label\n";
  for (std::size_t i = 0; i < f.size(); ++i) {
    ids << f.ids[i] << ',';
    if (!f.labels.empty()) ids << f.labels[i];
    ids << '\n';
  }
}

FeatureSet load_features(const std::filesystem::path& path) {
  const Checkpoint ck = load_checkpoint(path);
  FeatureSet f;
  f.x = ck.tensors.at("features");
  const std::string tag = ck.phase.value_or("");
  f.cue = tag.rfind("features-", 0) == 0 ? tag.substr(9) : tag;
  std::ifstream ids(path.string() + ".ids.csv");
  if (!ids) throw IoError("missing id sidecar " + path.string() + ".ids.csv");
  std::string line;
  std::getline(ids, line);
  bool any_label = false;
  std::vector<std::string> raw_labels;
  while (std::getline(ids, line)) {
    if (line.empty()) continue;
    const auto comma = line.rfind(',');
    if (comma == std::string::npos) throw IoError("malformed id sidecar line: " + line);
    f.ids.push_back(line.substr(0, comma));
    raw_labels.push_back(line.substr(comma + 1));
    any_label = any_label || !raw_labels.back().empty();
  }
  if (any_label) {
    for (const auto& l : raw_labels) {
      try {
        f.labels.push_back(std::stoi(l));
      } catch (const std::logic_error&) {
        throw IoError("bad label '" + l + "' in " + path.string() + ".ids.csv");
      }
    }
  }
  f.validate();
  return f;
}

}  // namespace shiftbench::cue
