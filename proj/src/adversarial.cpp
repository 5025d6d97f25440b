#include "shiftbench/adversarial.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "shiftbench/checkpoint.hpp"
#include "shiftbench/error.hpp"

namespace shiftbench::adv {

namespace {

constexpr double kClip = 1e-12;

double clip_prob(double p) { return std::clamp(p, kClip, 1.0 - kClip); }

void require_column(const Tensor& t, const char* what) {
  if (t.rank() != 2 || t.cols() != 1) {
    throw ShapeError(std::string(what) + ": expected an n x 1 probability column, got " +
                     t.shape_string());
  }
}

}  // namespace

std::pair<Tensor, Tensor> grl_forward_backward(const Tensor& x, const Tensor& upstream,
                                               double lambda_d) {
  if (!(lambda_d >= 0.0)) throw ConfigError("lambda_d: must be >= 0");
  if (!x.same_shape(upstream)) throw ShapeError("grl: upstream shape differs from input");
  Tensor g = upstream;
  g *= -lambda_d;
  return {x, std::move(g)};
}

LossResult domain_bce_loss(const Tensor& probs, std::span<const int> labels) {
  require_column(probs, "domain_bce_loss");
  if (labels.size() != probs.rows()) throw ShapeError("domain_bce_loss: label count mismatch");
  std::size_t n1 = 0;
  for (int d : labels) {
    if (d != 0 && d != 1) throw ShapeError("domain_bce_loss: labels must be 0 or 1");
    n1 += static_cast<std::size_t>(d);
  }
  const std::size_t n0 = labels.size() - n1;
  if (n0 == 0 || n1 == 0) throw ShapeError("domain_bce_loss: one domain side is empty");
  LossResult res{0.0, Tensor(probs.shape(), 0.0)};
  double s0 = 0.0, s1 = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double raw = probs[i];
    const double p = clip_prob(raw);
    const bool inside = raw > kClip && raw < 1.0 - kClip;
    if (labels[i] == 1) {
      s1 -= std::log(p);
      res.grad[i] = inside ? -1.0 / (p * static_cast<double>(n1)) : 0.0;
    } else {
      s0 -= std::log(1.0 - p);
      res.grad[i] = inside ? 1.0 / ((1.0 - p) * static_cast<double>(n0)) : 0.0;
    }
  }
  res.value = s0 / static_cast<double>(n0) + s1 / static_cast<double>(n1);
  return res;
}

LossResult adda_discriminator_loss(const Tensor& d_source, const Tensor& d_target) {
  require_column(d_source, "adda_discriminator_loss");
  require_column(d_target, "adda_discriminator_loss");
  std::vector<int> labels(d_source.rows(), 1);
  labels.resize(d_source.rows() + d_target.rows(), 0);
  return domain_bce_loss(Tensor::concat_rows(d_source, d_target), labels);
}

LossResult adda_mapping_loss(const Tensor& d_target) {
  require_column(d_target, "adda_mapping_loss");
  const std::size_t n = d_target.rows();
  LossResult res{0.0, Tensor(d_target.shape(), 0.0)};
  for (std::size_t i = 0; i < n; ++i) {
    const double raw = d_target[i];
    const double p = clip_prob(raw);
    res.value -= std::log(p);
    res.grad[i] = raw > kClip && raw < 1.0 - kClip ? -1.0 / (p * static_cast<double>(n)) : 0.0;
  }
  res.value /= static_cast<double>(n);
  return res;
}

double empirical_h_divergence(const Tensor& features_s, const Tensor& features_t,
                              const ProbeConfig& probe) {
  if (features_s.rows() < 10 || features_t.rows() < 10) {
    throw ShapeError("empirical_h_divergence: need at least 10 samples per side");
  }
  if (features_s.cols() != features_t.cols()) {
    throw ShapeError("empirical_h_divergence: feature dims differ");
  }
  features_s.check_finite("probe source features");
  features_t.check_finite("probe target features");
  const std::size_t dim = features_s.cols();

  Rng rng(derive_seed(probe.seed, 31));
  auto halves = [&](const Tensor& f) {
    std::vector<std::size_t> idx(f.rows());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    rng.shuffle(idx);
    const std::size_t h = f.rows() / 2;
    return std::pair{f.gather_rows(std::span(idx).first(h)), f.gather_rows(std::span(idx).subspan(h))};
  };
  auto [tr_s, ho_s] = halves(features_s);
  auto [tr_t, ho_t] = halves(features_t);

  // standardize with training-half statistics
  const Tensor pooled = Tensor::concat_rows(tr_s, tr_t);
  std::vector<double> mu(dim, 0.0), sd(dim, 0.0);
  for (std::size_t r = 0; r < pooled.rows(); ++r) {
    for (std::size_t c = 0; c < dim; ++c) mu[c] += pooled(r, c);
  }
  for (auto& m : mu) m /= static_cast<double>(pooled.rows());
  for (std::size_t r = 0; r < pooled.rows(); ++r) {
    for (std::size_t c = 0; c < dim; ++c) sd[c] += (pooled(r, c) - mu[c]) * (pooled(r, c) - mu[c]);
  }
  for (auto& s : sd) {
    s = std::sqrt(s / static_cast<double>(pooled.rows()));
    if (!(s > 1e-12)) s = 1.0;
  }
  auto score = [&](const std::vector<double>& w, double b, std::span<const double> x) {
    double z = b;
    for (std::size_t c = 0; c < dim; ++c) z += w[c] * (x[c] - mu[c]) / sd[c];
    return z;
  };

  // Full-batch gradient descent on the class-balanced logistic loss; label
  // 1 = target.
  std::vector<double> w(dim, 0.0);
  double b = 0.0;
  for (std::size_t epoch = 0; epoch < probe.epochs; ++epoch) {
    std::vector<double> gw(dim, 0.0);
    double gb = 0.0;
    auto accumulate = [&](const Tensor& f, double label) {
      const double inv_n = 1.0 / static_cast<double>(f.rows());
      for (std::size_t r = 0; r < f.rows(); ++r) {
        const double z = score(w, b, f.row(r));
        const double p = z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
        const double e = (p - label) * inv_n;
        gb += e;
        for (std::size_t c = 0; c < dim; ++c) gw[c] += e * (f(r, c) - mu[c]) / sd[c];
      }
    };
    accumulate(tr_s, 0.0);
    accumulate(tr_t, 1.0);
    for (std::size_t c = 0; c < dim; ++c) w[c] -= probe.learning_rate * gw[c];
    b -= probe.learning_rate * gb;
  }

  auto error_rate = [&](const Tensor& f, bool target) {
    std::size_t wrong = 0;
    for (std::size_t r = 0; r < f.rows(); ++r) {
      if ((score(w, b, f.row(r)) > 0.0) != target) ++wrong;
    }
    return static_cast<double>(wrong) / static_cast<double>(f.rows());
  };
  const double e = error_rate(ho_s, false) + error_rate(ho_t, true);
  return 2.0 * (1.0 - std::min(e, 2.0 - e));
}

void DannConfig::validate(const NetworkSpec& classifier) const {
  if (!(lambda_d >= 0.0)) throw ConfigError("lambda_d: must be >= 0");
  if (attach == 0 || attach >= classifier.layers.size()) {
    throw ConfigError("dann.attach: must split the classifier into two non-empty parts (got " +
                      std::to_string(attach) + ")");
  }
  for (auto h : domain_hidden) {
    if (h == 0) throw ConfigError("dann.domain_hidden: widths must be positive");
  }
}

DannModel make_dann(const Model& classifier, const DannConfig& cfg, std::uint64_t seed) {
  cfg.validate(classifier.spec);
  auto [gf, gy] = split_model(classifier, cfg.attach, Role::feature_extractor, Role::label_predictor);
  NetworkSpec d;
  d.role = Role::domain_classifier;
  std::size_t prev = gf.spec.out_dim();
  d.layers.push_back(LayerSpec::gradient_reversal(prev, cfg.lambda_d));
  for (auto h : cfg.domain_hidden) {
    d.layers.push_back(LayerSpec::linear(prev, h));
    d.layers.push_back(LayerSpec::relu(h));
    prev = h;
  }
  d.layers.push_back(LayerSpec::linear(prev, 1));
  d.layers.push_back(LayerSpec::sigmoid(1));
  const NetworkSpec parts[] = {gf.spec, gy.spec, d};
  validate_composition(parts);
  return {std::move(gf), std::move(gy), make_model(std::move(d), seed)};
}

Model dann_classifier(const DannModel& m) { return compose_models(m.gf, m.gy, Role::classifier); }

Tensor dann_features(const DannModel& m, const Tensor& x) {
  return predict(m.gf.spec, m.gf.params, m.gf.buffers, x, Domain::target);
}

DannResult dann_train(DannModel model, const Dataset& source, const Dataset& target,
                      const DannConfig& dcfg, const TrainConfig& cfg) {
  cfg.validate();
  if (!(dcfg.lambda_d >= 0.0)) throw ConfigError("lambda_d: must be >= 0");
  model.gd.spec.layers.front().reversal_weight = dcfg.lambda_d;

  auto opt_f = cfg.optimizer(), opt_y = cfg.optimizer(), opt_d = cfg.optimizer();
  const std::size_t nb = cfg.batch_size;
  BatchSampler src(source.size(), nb, derive_seed(cfg.seed, streams::source_batches));
  BatchSampler tgt(target.size(), nb, derive_seed(cfg.seed, streams::target_batches));
  std::vector<int> domain_labels(nb, 0);
  domain_labels.resize(2 * nb, 1);

  DannResult res;
  res.log.columns = {"epoch", "train_loss", "domain_loss", "domain_acc", "source_acc", "target_acc"};
  ForwardContext ctx;
  ctx.mode = Mode::train;
  ctx.n_source = nb;
  const std::size_t iters = src.batches_per_epoch();
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    double ly_sum = 0.0, ld_sum = 0.0, acc_sum = 0.0;
    for (std::size_t it = 0; it < iters; ++it) {
      const auto is = src.next();
      const auto itg = tgt.next();
      std::vector<int> ys;
      for (auto i : is) ys.push_back(source.y[i]);
      const Tensor x = stack_domains(source.x.gather_rows(is), target.x.gather_rows(itg));

      auto f = forward(model.gf.spec, model.gf.params, model.gf.buffers, x, ctx);
      ForwardContext src_ctx;
      src_ctx.mode = Mode::train;
      auto y = forward(model.gy.spec, model.gy.params, model.gy.buffers, f.output.slice_rows(0, nb),
                       src_ctx);
      const auto ce = cross_entropy_loss(softmax_rows(y.output), ys);
      auto d = forward(model.gd.spec, model.gd.params, model.gd.buffers, f.output, ctx);
      const auto bce = domain_bce_loss(d.output, domain_labels);
      check_loss(ce.value, "label loss", epoch, opt_f.iteration);
      check_loss(bce.value, "domain loss", epoch, opt_f.iteration);
      ly_sum += ce.value;
      ld_sum += bce.value;
      std::size_t right = 0;
      for (std::size_t r = 0; r < 2 * nb; ++r) {
        if ((d.output[r] > 0.5) == (domain_labels[r] == 1)) ++right;
      }
      acc_sum += static_cast<double>(right) / static_cast<double>(2 * nb);

      auto by = backward(model.gy.spec, model.gy.params, y.tape, ce.grad);
      auto bd = backward(model.gd.spec, model.gd.params, d.tape, bce.grad);
      Tensor upstream = bd.input_grad;
      for (std::size_t r = 0; r < nb; ++r) {
        auto u = upstream.row(r);
        auto g = by.input_grad.row(r);
        for (std::size_t c = 0; c < u.size(); ++c) u[c] = g[c] + u[c];
      }
      auto bf = backward(model.gf.spec, model.gf.params, f.tape, upstream);
      sgd_step(opt_f, model.gf.params, bf.grads);
      sgd_step(opt_y, model.gy.params, by.grads);
      sgd_step(opt_d, model.gd.params, bd.grads);
    }
    const double n = static_cast<double>(iters);
    const Model clf = dann_classifier(model);
    res.log.rows.push_back({static_cast<double>(epoch), ly_sum / n, ld_sum / n, acc_sum / n,
                            evaluate_accuracy(clf, source, Domain::source),
                            evaluate_accuracy(clf, target, Domain::target)});
  }
  const Model clf = dann_classifier(model);
  res.source_accuracy = evaluate_accuracy(clf, source, Domain::source);
  res.target_accuracy = evaluate_accuracy(clf, target, Domain::target);
  res.model = std::move(model);
  return res;
}

void AddaConfig::validate(const NetworkSpec& classifier) const {
  if (split == 0 || split >= classifier.layers.size()) {
    throw ConfigError("adda.split: must split the classifier into two non-empty parts (got " +
                      std::to_string(split) + ")");
  }
  for (auto h : disc_hidden) {
    if (h == 0) throw ConfigError("adda.discriminator_hidden: widths must be positive");
  }
}

AddaState make_adda(const Model& classifier, const AddaConfig& cfg, std::uint64_t seed) {
  cfg.validate(classifier.spec);
  AddaState st;
  std::tie(st.ms, st.c) = split_model(classifier, cfg.split, Role::source_map, Role::classifier);
  st.mt = with_role(st.ms, Role::target_map);
  NetworkSpec d;
  d.role = Role::discriminator;
  std::size_t prev = st.ms.spec.out_dim();
  for (auto h : cfg.disc_hidden) {
    d.layers.push_back(LayerSpec::linear(prev, h));
    d.layers.push_back(LayerSpec::relu(h));
    prev = h;
  }
  d.layers.push_back(LayerSpec::linear(prev, 1));
  d.layers.push_back(LayerSpec::sigmoid(1));
  st.d = make_model(std::move(d), seed);
  const NetworkSpec parts[] = {st.ms.spec, st.c.spec, st.mt.spec, st.d.spec};
  validate_composition(parts);
  return st;
}

SourceOnlyResult adda_pretrain(AddaState& state, const Dataset& source, const Dataset& target,
                               const TrainConfig& cfg) {
  const std::size_t split = state.ms.spec.layers.size();
  auto res = train_source_only(compose_models(state.ms, state.c, Role::classifier), source, target, cfg);
  std::tie(state.ms, state.c) = split_model(res.model, split, Role::source_map, Role::classifier);
  state.mt = with_role(state.ms, Role::target_map);
  state.phase = AddaPhase::pretrained;
  return res;
}

namespace {

Tensor apply(const Model& m, const Tensor& x) {
  return predict(m.spec, m.params, m.buffers, x, Domain::target);
}

Tensor apply_source(const Model& m, const Tensor& x) {
  return predict(m.spec, m.params, m.buffers, x, Domain::source);
}

double split_accuracy(const Tensor& ps, const Tensor& pt) {
  std::size_t right = 0;
  for (std::size_t r = 0; r < ps.rows(); ++r) right += ps[r] > 0.5 ? 1 : 0;
  for (std::size_t r = 0; r < pt.rows(); ++r) right += pt[r] > 0.5 ? 0 : 1;
  return static_cast<double>(right) / static_cast<double>(ps.rows() + pt.rows());
}

}  // namespace

AddaAdaptResult adda_adapt(AddaState& state, const Dataset& source, const Dataset& target,
                           const TrainConfig& d_cfg, const TrainConfig& m_cfg) {
  if (state.phase == AddaPhase::fresh) {
    throw TrainingError("adda_adapt: phase-1 pretraining has not been run");
  }
  d_cfg.validate();
  m_cfg.validate();
  state.mt = with_role(state.ms, Role::target_map);

  auto opt_d = d_cfg.optimizer();
  auto opt_m = m_cfg.optimizer();
  const std::size_t nb = m_cfg.batch_size;
  BatchSampler src(source.size(), nb, derive_seed(m_cfg.seed, streams::source_batches));
  BatchSampler tgt(target.size(), nb, derive_seed(m_cfg.seed, streams::target_batches));

  AddaAdaptResult res;
  res.log.columns = {"epoch", "d_loss", "m_loss", "d_acc", "target_acc"};
  ForwardContext ctx;
  ctx.mode = Mode::train;
  const std::size_t iters = src.batches_per_epoch();
  const Model ms = state.ms;
  for (std::size_t epoch = 0; epoch < m_cfg.epochs; ++epoch) {
    double dl = 0.0, ml = 0.0, acc = 0.0;
    bool collapsed = iters > 0;
    for (std::size_t it = 0; it < iters; ++it) {
      const auto is = src.next();
      const auto itg = tgt.next();
      const Tensor fs = apply_source(ms, source.x.gather_rows(is));
      auto ft = forward(state.mt.spec, state.mt.params, state.mt.buffers, target.x.gather_rows(itg), ctx);

      // discriminator step
      auto dfw = forward(state.d.spec, state.d.params, state.d.buffers, stack_domains(fs, ft.output), ctx);
      const Tensor ps = dfw.output.slice_rows(0, nb);
      const Tensor pt = dfw.output.slice_rows(nb, 2 * nb);
      const double a = split_accuracy(ps, pt);
      acc += a;
      collapsed = collapsed && a == 1.0;
      const auto ld = adda_discriminator_loss(ps, pt);
      check_loss(ld.value, "discriminator loss", epoch, opt_d.iteration);
      dl += ld.value;
      auto bd = backward(state.d.spec, state.d.params, dfw.tape, ld.grad);
      sgd_step(opt_d, state.d.params, bd.grads);

      // mapping step through the updated, fixed discriminator
      auto dm = forward(state.d.spec, state.d.params, state.d.buffers, ft.output, ctx);
      const auto lm = adda_mapping_loss(dm.output);
      check_loss(lm.value, "mapping loss", epoch, opt_m.iteration);
      ml += lm.value;
      auto bdm = backward(state.d.spec, state.d.params, dm.tape, lm.grad);
      auto bm = backward(state.mt.spec, state.mt.params, ft.tape, bdm.input_grad);
      sgd_step(opt_m, state.mt.params, bm.grads);
    }
    const double n = static_cast<double>(iters);
    res.d_accuracy.push_back(acc / n);
    if (collapsed) {
      res.log.notes.push_back("warning: discriminator accuracy pinned at 1.0 for all of epoch " +
                              std::to_string(epoch) + "; the mapping may be receiving no signal");
    }
    const Model clf = compose_models(state.mt, state.c, Role::classifier);
    res.log.rows.push_back({static_cast<double>(epoch), dl / n, ml / n, acc / n,
                            evaluate_accuracy(clf, target, Domain::target)});
  }
  state.phase = AddaPhase::adapted;
  return res;
}

double adda_test(const AddaState& state, const Dataset& target) {
  if (state.phase != AddaPhase::adapted) {
    throw TrainingError("adda_test: adaptation phase has not completed");
  }
  if (target.size() == 0) throw ShapeError("adda_test: empty test set");
  return accuracy_from_scores(apply(state.c, apply(state.mt, target.x)), target.y);
}

double adda_source_baseline(const AddaState& state, const Dataset& target) {
  if (state.phase == AddaPhase::fresh) throw TrainingError("adda: phase-1 pretraining has not been run");
  if (target.size() == 0) throw ShapeError("adda: empty test set");
  return accuracy_from_scores(apply(state.c, apply_source(state.ms, target.x)), target.y);
}

double adda_discriminator_accuracy(const AddaState& state, const Tensor& xs, const Tensor& xt) {
  if (xs.empty() || xt.empty()) throw ShapeError("adda_discriminator_accuracy: empty input");
  return split_accuracy(apply(state.d, apply_source(state.ms, xs)), apply(state.d, apply(state.mt, xt)));
}

namespace {

void collect(const Model& m, Parameters& out) {
  for (const auto& e : m.params.entries()) out.add(e.name, e.value);
  for (const auto& e : m.buffers.entries()) out.add(e.name, e.value);
}

void restore(Model& m, const Parameters& in, const std::filesystem::path& path) {
  auto fill = [&](Parameters& dst) {
    for (auto& e : dst.entries()) {
      if (!in.contains(e.name)) {
        throw IoError(path.string() + ": checkpoint lacks tensor " + e.name);
      }
      const Tensor& t = in.at(e.name);
      if (!t.same_shape(e.value)) {
        throw IoError(path.string() + ": tensor " + e.name + " has shape " + t.shape_string() +
                      ", expected " + e.value.shape_string());
      }
      e.value = t;
    }
  };
  fill(m.params);
  fill(m.buffers);
}

}  // namespace

void save_adda(const AddaState& state, const std::filesystem::path& dir) {
  if (state.phase == AddaPhase::fresh) throw TrainingError("save_adda: nothing trained yet");
  std::filesystem::create_directories(dir);
  Checkpoint p1;
  p1.phase = "pretrained";
  collect(state.ms, p1.tensors);
  collect(state.c, p1.tensors);
  save_checkpoint(dir / "phase1.ckpt", p1);
  if (state.phase == AddaPhase::adapted) {
    Checkpoint p2;
    p2.phase = "adapted";
    collect(state.mt, p2.tensors);
    collect(state.d, p2.tensors);
    save_checkpoint(dir / "phase2.ckpt", p2);
  }
}

void load_adda(AddaState& state, const std::filesystem::path& dir) {
  const auto p1 = dir / "phase1.ckpt";
  if (!std::filesystem::exists(p1)) throw IoError("missing phase checkpoint " + p1.string());
  const Checkpoint c1 = load_checkpoint(p1);
  if (c1.phase != "pretrained") throw IoError(p1.string() + ": not a phase-1 checkpoint");
  restore(state.ms, c1.tensors, p1);
  restore(state.c, c1.tensors, p1);
  state.mt = with_role(state.ms, Role::target_map);
  state.phase = AddaPhase::pretrained;
  const auto p2 = dir / "phase2.ckpt";
  if (std::filesystem::exists(p2)) {
    const Checkpoint c2 = load_checkpoint(p2);
    if (c2.phase != "adapted") throw IoError(p2.string() + ": not a phase-2 checkpoint");
    restore(state.mt, c2.tensors, p2);
    restore(state.d, c2.tensors, p2);
    state.phase = AddaPhase::adapted;
  }
}

}  // namespace shiftbench::adv
