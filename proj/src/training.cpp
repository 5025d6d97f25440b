#include "shiftbench/training.hpp"

#include <cmath>
#include <iomanip>
#include <numeric>
#include <ostream>

#include "shiftbench/error.hpp"
#include "shiftbench/losses.hpp"

namespace shiftbench {

void Dataset::validate() const {
  const std::size_t n = y.size();
  if (x.rows() != n && !(n == 0 && x.empty())) {
    throw ShapeError("dataset has " + std::to_string(x.rows()) + " feature rows but " +
                     std::to_string(n) + " labels");
  }
  auto check = [&](std::size_t len, const char* what) {
    if (len != n) throw ShapeError(std::string("dataset ") + what + " length mismatch");
  };
  check(ids.size(), "ids");
  check(instances.size(), "instances");
  check(distance_mm.size(), "distance_mm");
  check(null_fraction.size(), "null_fraction");
  for (int label : y) {
    if (label < 0 || static_cast<std::size_t>(label) >= num_classes) {
      throw ShapeError("dataset label " + std::to_string(label) + " out of range");
    }
  }
}

Dataset Dataset::subset(std::span<const std::size_t> idx) const {
  Dataset d;
  d.num_classes = num_classes;
  if (idx.empty()) return d;
  d.x = x.gather_rows(idx);
  for (auto i : idx) {
    d.y.push_back(y[i]);
    d.ids.push_back(ids[i]);
    d.instances.push_back(instances[i]);
    d.distance_mm.push_back(distance_mm[i]);
    d.null_fraction.push_back(null_fraction[i]);
  }
  return d;
}

BatchSampler::BatchSampler(std::size_t n, std::size_t batch, std::uint64_t seed)
    : n_(n), batch_(batch), rng_(seed) {
  if (batch == 0 || n < batch) {
    throw ConfigError("batch_size: " + std::to_string(batch) + " needs at least that many samples (have " +
                      std::to_string(n) + ")");
  }
  order_.resize(n);
  reshuffle();
}

void BatchSampler::reshuffle() {
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  rng_.shuffle(order_);
  pos_ = 0;
}

std::vector<std::size_t> BatchSampler::next() {
  if (pos_ + batch_ > n_) reshuffle();
  std::vector<std::size_t> out(order_.begin() + static_cast<std::ptrdiff_t>(pos_),
                               order_.begin() + static_cast<std::ptrdiff_t>(pos_ + batch_));
  pos_ += batch_;
  return out;
}

void TrainConfig::validate() const {
  if (batch_size == 0) throw ConfigError("batch_size: must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum: must lie in [0, 1)");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay: must be >= 0");
  lr.validate();
}

namespace streams {
std::uint64_t init(Role role) { return 100 + static_cast<std::uint64_t>(role); }
}  // namespace streams

void MetricsLog::write_csv(std::ostream& os) const {
  for (std::size_t c = 0; c < columns.size(); ++c) os << (c ? "," : "") << columns[c];
  os << '\n';
  const auto old = os.precision(10);
  for (const auto& r : rows) {
    for (std::size_t c = 0; c < r.size(); ++c) os << (c ? "," : "") << r[c];
    os << '\n';
  }
  os.precision(old);
}

std::vector<double> MetricsLog::column(std::string_view name) const {
  for (std::size_t c = 0; c < columns.size(); ++c) {
    if (columns[c] == name) {
      std::vector<double> out;
      for (const auto& r : rows) out.push_back(r[c]);
      return out;
    }
  }
  throw ConfigError("metrics log has no column " + std::string(name));
}

Model make_model(NetworkSpec spec, std::uint64_t seed) {
  Model m;
  m.params = init_parameters(spec, derive_seed(seed, streams::init(spec.role)));
  m.buffers = init_buffers(spec);
  m.spec = std::move(spec);
  return m;
}

namespace {

// Copies every tensor of layer `from` in `src` to layer `to` of `dst_spec`.
void move_layer(const NetworkSpec& src_spec, std::size_t from, const Parameters& src,
                const NetworkSpec& dst_spec, std::size_t to, Parameters& dst) {
  const std::string prefix = param_name(src_spec, from, "");
  for (const auto& [name, t] : src.entries()) {
    if (name.rfind(prefix, 0) == 0) dst.add(param_name(dst_spec, to, name.substr(prefix.size())), t);
  }
}

}  // namespace

std::pair<Model, Model> split_model(const Model& model, std::size_t at, Role first, Role second) {
  const auto& layers = model.spec.layers;
  if (at == 0 || at >= layers.size()) throw ShapeError("split point out of range");
  Model a, b;
  a.spec.role = first;
  b.spec.role = second;
  a.spec.layers.assign(layers.begin(), layers.begin() + static_cast<std::ptrdiff_t>(at));
  b.spec.layers.assign(layers.begin() + static_cast<std::ptrdiff_t>(at), layers.end());
  for (std::size_t i = 0; i < layers.size(); ++i) {
    Model& dst = i < at ? a : b;
    const std::size_t to = i < at ? i : i - at;
    move_layer(model.spec, i, model.params, dst.spec, to, dst.params);
    move_layer(model.spec, i, model.buffers, dst.spec, to, dst.buffers);
  }
  a.spec.validate();
  b.spec.validate();
  return {std::move(a), std::move(b)};
}

Model with_role(const Model& model, Role role) {
  Model m;
  m.spec = model.spec;
  m.spec.role = role;
  for (std::size_t i = 0; i < m.spec.layers.size(); ++i) {
    move_layer(model.spec, i, model.params, m.spec, i, m.params);
    move_layer(model.spec, i, model.buffers, m.spec, i, m.buffers);
  }
  return m;
}

Model compose_models(const Model& first, const Model& second, Role role) {
  Model m;
  m.spec.role = role;
  m.spec.layers = first.spec.layers;
  m.spec.layers.insert(m.spec.layers.end(), second.spec.layers.begin(), second.spec.layers.end());
  m.spec.validate();
  const std::size_t n1 = first.spec.layers.size();
  for (std::size_t i = 0; i < n1; ++i) {
    move_layer(first.spec, i, first.params, m.spec, i, m.params);
    move_layer(first.spec, i, first.buffers, m.spec, i, m.buffers);
  }
  for (std::size_t i = 0; i < second.spec.layers.size(); ++i) {
    move_layer(second.spec, i, second.params, m.spec, n1 + i, m.params);
    move_layer(second.spec, i, second.buffers, m.spec, n1 + i, m.buffers);
  }
  return m;
}

double evaluate_accuracy(const Model& model, const Dataset& data, Domain domain) {
  if (data.size() == 0) throw ShapeError("cannot evaluate accuracy on an empty set");
  return accuracy_from_scores(predict(model.spec, model.params, model.buffers, data.x, domain),
                              data.y);
}

void check_loss(double value, std::string_view what, std::size_t epoch, std::size_t iteration) {
  if (!std::isfinite(value)) {
    throw TrainingError("training diverged: " + std::string(what) + " is " +
                        std::to_string(value) + " at epoch " + std::to_string(epoch) +
                        ", iteration " + std::to_string(iteration));
  }
}

Tensor stack_domains(const Tensor& source, const Tensor& target) {
  return Tensor::concat_rows(source, target);
}

SourceOnlyResult train_source_only(Model model, const Dataset& source, const Dataset& target,
                                   const TrainConfig& cfg) {
  cfg.validate();
  auto opt = cfg.optimizer();
  BatchSampler sampler(source.size(), cfg.batch_size,
                       derive_seed(cfg.seed, streams::source_batches));
  SourceOnlyResult res;
  res.log.columns = {"epoch", "train_loss", "source_acc", "target_acc"};
  ForwardContext ctx;
  ctx.mode = Mode::train;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    double loss_sum = 0.0;
    const std::size_t iters = sampler.batches_per_epoch();
    for (std::size_t it = 0; it < iters; ++it) {
      const auto idx = sampler.next();
      const Tensor xb = source.x.gather_rows(idx);
      std::vector<int> yb;
      for (auto i : idx) yb.push_back(source.y[i]);
      auto fwd = forward(model.spec, model.params, model.buffers, xb, ctx);
      auto loss = cross_entropy_loss(softmax_rows(fwd.output), yb);
      check_loss(loss.value, "source cross-entropy", epoch, opt.iteration);
      loss_sum += loss.value;
      auto bwd = backward(model.spec, model.params, fwd.tape, loss.grad);
      sgd_step(opt, model.params, bwd.grads);
    }
    res.log.rows.push_back({static_cast<double>(epoch), loss_sum / static_cast<double>(iters),
                            evaluate_accuracy(model, source, Domain::source),
                            evaluate_accuracy(model, target, Domain::target)});
  }
  res.source_accuracy = evaluate_accuracy(model, source, Domain::source);
  res.target_accuracy = evaluate_accuracy(model, target, Domain::target);
  res.model = std::move(model);
  return res;
}

}  // namespace shiftbench
