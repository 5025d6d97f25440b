#include "shiftbench/autodial.hpp"

#include <cmath>
#include <string>

#include "shiftbench/error.hpp"

namespace shiftbench::autodial {

double alpha_from_rho(double rho) {
  const double s = rho >= 0.0 ? 1.0 / (1.0 + std::exp(-rho)) : std::exp(rho) / (1.0 + std::exp(rho));
  return 0.5 + 0.5 * s;
}

double dalpha_drho(double rho) {
  const double s = rho >= 0.0 ? 1.0 / (1.0 + std::exp(-rho)) : std::exp(rho) / (1.0 + std::exp(rho));
  return 0.5 * s * (1.0 - s);
}

double rho_from_alpha(double alpha) {
  if (!(alpha > 0.5 && alpha < 1.0)) throw ConfigError("alpha must lie strictly inside (0.5, 1)");
  const double s = 2.0 * alpha - 1.0;
  return std::log(s / (1.0 - s));
}

namespace {

void apply_affine(const DaLayerState& st, Tensor& y) {
  if (!st.affine) return;
  for (std::size_t r = 0; r < y.rows(); ++r) {
    auto row = y.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) {
      const double a = st.scale.empty() ? 1.0 : st.scale[c];
      const double b = st.shift.empty() ? 0.0 : st.shift[c];
      row[c] = row[c] * a + b;
    }
  }
}

// Running moments start at mean 0 / variance 1, as network buffers do.
void blend(Tensor& running, const std::vector<double>& batch, double momentum, double init) {
  if (running.empty()) running = Tensor::vector(batch.size(), init);
  for (std::size_t c = 0; c < running.size(); ++c) {
    running[c] = (1.0 - momentum) * running[c] + momentum * batch[c];
  }
}

std::vector<double> as_vec(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

}  // namespace

std::pair<Tensor, Tensor> da_layer_forward(const Tensor& source, const Tensor& target,
                                           DaLayerState& state, Mode mode) {
  const double alpha = state.alpha();
  if (mode == Mode::train) {
    if (source.empty() || target.empty()) {
      throw ShapeError("da_layer_forward: train mode needs both source and target rows");
    }
    if (source.cols() != target.cols()) throw ShapeError("da_layer_forward: dim mismatch");
    const Moments ms = column_moments(source, 0, source.rows());
    const Moments mt = column_moments(target, 0, target.rows());
    const Moments st = mix_moments(ms, mt, alpha);
    const Moments ts = mix_moments(mt, ms, alpha);
    Tensor ys(source.shape(), 0.0), yt(target.shape(), 0.0);
    normalize_rows(source, 0, source.rows(), st.mean, inverse_std(st.var, state.eps), ys);
    normalize_rows(target, 0, target.rows(), ts.mean, inverse_std(ts.var, state.eps), yt);
    blend(state.running_mean_st, st.mean, state.momentum, 0.0);
    blend(state.running_var_st, st.var, state.momentum, 1.0);
    blend(state.running_mean_ts, ts.mean, state.momentum, 0.0);
    blend(state.running_var_ts, ts.var, state.momentum, 1.0);
    apply_affine(state, ys);
    apply_affine(state, yt);
    return {std::move(ys), std::move(yt)};
  }
  if (state.running_mean_st.empty()) {
    throw ShapeError("da_layer_forward: eval mode needs running moments from a train-mode pass");
  }
  auto eval_half = [&](const Tensor& x, const Tensor& mean, const Tensor& var) {
    if (x.empty()) return Tensor{};
    Tensor y(x.shape(), 0.0);
    normalize_rows(x, 0, x.rows(), as_vec(mean), inverse_std(as_vec(var), state.eps), y);
    apply_affine(state, y);
    return y;
  };
  return {eval_half(source, state.running_mean_st, state.running_var_st),
          eval_half(target, state.running_mean_ts, state.running_var_ts)};
}

LossResult entropy_loss(const Tensor& probs) {
  const std::size_t n = probs.rows();
  LossResult res{0.0, Tensor(probs.shape(), 0.0)};
  for (std::size_t r = 0; r < n; ++r) {
    auto p = probs.row(r);
    double s = 0.0, h = 0.0;
    for (double v : p) {
      s += v;
      if (v > 0.0) h -= v * std::log(v);
    }
    if (std::abs(s - 1.0) > 1e-6) throw ShapeError("entropy_loss: row does not sum to 1");
    res.value += h;
    auto g = res.grad.row(r);
    for (std::size_t c = 0; c < p.size(); ++c) {
      g[c] = p[c] > 0.0 ? -p[c] * (std::log(p[c]) + h) : 0.0;
    }
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  res.value *= inv_n;
  res.grad *= inv_n;
  return res;
}

void AutodialConfig::validate() const {
  if (!(lambda >= 0.0)) throw ConfigError("loss_weights.target_entropy: must be >= 0");
  if (!(momentum > 0.0 && momentum <= 1.0)) throw ConfigError("autodial.momentum: must lie in (0, 1]");
  if (pinned_alpha && !(*pinned_alpha >= 0.5 && *pinned_alpha <= 1.0)) {
    throw ConfigError("autodial.pinned_alpha: must lie in [0.5, 1]");
  }
}

namespace {

NetworkSpec normalized_mlp(std::size_t in, std::span<const std::size_t> hidden,
                           std::size_t classes, const AutodialConfig& cfg, bool da) {
  cfg.validate();
  NetworkSpec net;
  net.role = Role::classifier;
  std::size_t prev = in;
  for (auto h : hidden) {
    net.layers.push_back(LayerSpec::linear(prev, h));
    LayerSpec norm = da ? LayerSpec::da_layer(h, cfg.affine) : LayerSpec::batchnorm(h, cfg.affine);
    norm.momentum = cfg.momentum;
    norm.initial_rho = cfg.initial_rho;
    if (da) norm.pinned_alpha = cfg.pinned_alpha;
    net.layers.push_back(norm);
    net.layers.push_back(LayerSpec::relu(h));
    prev = h;
  }
  net.layers.push_back(LayerSpec::linear(prev, classes));
  net.validate();
  return net;
}

}  // namespace

NetworkSpec autodial_network(std::size_t in, std::span<const std::size_t> hidden,
                             std::size_t classes, const AutodialConfig& cfg) {
  return normalized_mlp(in, hidden, classes, cfg, true);
}

NetworkSpec batchnorm_network(std::size_t in, std::span<const std::size_t> hidden,
                              std::size_t classes, const AutodialConfig& cfg) {
  return normalized_mlp(in, hidden, classes, cfg, false);
}

AutodialResult autodial_train(Model model, const Dataset& source, const Dataset& target,
                              const AutodialConfig& acfg, const TrainConfig& cfg) {
  cfg.validate();
  acfg.validate();
  std::vector<std::size_t> da_layers;
  for (std::size_t i = 0; i < model.spec.layers.size(); ++i) {
    if (model.spec.layers[i].kind == LayerKind::da_layer) da_layers.push_back(i);
  }
  if (da_layers.empty()) throw ConfigError("autodial_train: network has no da-layers");

  auto opt = cfg.optimizer();
  const std::size_t nb = cfg.batch_size;
  BatchSampler src(source.size(), nb, derive_seed(cfg.seed, streams::source_batches));
  BatchSampler tgt(target.size(), nb, derive_seed(cfg.seed, streams::target_batches));

  auto current_alphas = [&] {
    std::vector<double> a;
    for (auto i : da_layers) {
      const auto& l = model.spec.layers[i];
      a.push_back(l.pinned_alpha ? *l.pinned_alpha
                                 : alpha_from_rho(model.params.at(param_name(model.spec, i, "rho"))[0]));
    }
    return a;
  };

  AutodialResult res;
  res.log.columns = {"epoch", "train_loss", "source_loss", "target_entropy"};
  for (auto i : da_layers) res.log.columns.push_back("alpha_layer" + std::to_string(i));
  res.log.columns.insert(res.log.columns.end(), {"source_acc", "target_acc"});

  ForwardContext ctx;
  ctx.mode = Mode::train;
  ctx.n_source = nb;
  const std::size_t iters = src.batches_per_epoch();
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    double loss_sum = 0.0, src_sum = 0.0, ent_sum = 0.0;
    for (std::size_t it = 0; it < iters; ++it) {
      const auto is = src.next();
      const auto itg = tgt.next();
      std::vector<int> ys;
      for (auto i : is) ys.push_back(source.y[i]);
      const Tensor x = stack_domains(source.x.gather_rows(is), target.x.gather_rows(itg));
      auto fwd = forward(model.spec, model.params, model.buffers, x, ctx);
      const auto ce = cross_entropy_loss(softmax_rows(fwd.output.slice_rows(0, nb)), ys);
      const auto ent = entropy_loss(softmax_rows(fwd.output.slice_rows(nb, fwd.output.rows())));
      const double loss = ce.value + acfg.lambda * ent.value;
      check_loss(loss, "AutoDIAL loss", epoch, opt.iteration);
      loss_sum += loss;
      src_sum += ce.value;
      ent_sum += ent.value;
      Tensor upstream(fwd.output.shape(), 0.0);
      const std::size_t k = upstream.cols();
      for (std::size_t r = 0; r < nb; ++r) {
        for (std::size_t c = 0; c < k; ++c) upstream(r, c) = ce.grad(r, c);
      }
      for (std::size_t r = 0; r < ent.grad.rows(); ++r) {
        for (std::size_t c = 0; c < k; ++c) upstream(nb + r, c) = acfg.lambda * ent.grad(r, c);
      }
      auto bwd = backward(model.spec, model.params, fwd.tape, upstream);
      sgd_step(opt, model.params, bwd.grads);
      res.alpha_trace.push_back(current_alphas());
    }
    const double d = static_cast<double>(iters);
    std::vector<double> row{static_cast<double>(epoch), loss_sum / d, src_sum / d, ent_sum / d};
    for (double a : current_alphas()) row.push_back(a);
    row.push_back(evaluate_accuracy(model, source, Domain::source));
    row.push_back(evaluate_accuracy(model, target, Domain::target));
    res.log.rows.push_back(std::move(row));
  }
  res.source_accuracy = evaluate_accuracy(model, source, Domain::source);
  res.target_accuracy = evaluate_accuracy(model, target, Domain::target);
  res.model = std::move(model);
  return res;
}

}  // namespace shiftbench::autodial
