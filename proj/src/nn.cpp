#include "shiftbench/nn.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "shiftbench/autodial.hpp"
#include "shiftbench/error.hpp"
#include "shiftbench/normalization.hpp"
#include "shiftbench/rng.hpp"

namespace shiftbench {

std::string_view to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::linear: return "linear";
    case LayerKind::relu: return "relu";
    case LayerKind::sigmoid: return "sigmoid";
    case LayerKind::softmax: return "softmax";
    case LayerKind::batchnorm: return "batchnorm";
    case LayerKind::gradient_reversal: return "gradient-reversal";
    case LayerKind::da_layer: return "da-layer";
  }
  return "?";
}

LayerSpec LayerSpec::linear(std::size_t in, std::size_t out) {
  LayerSpec s;
  s.kind = LayerKind::linear;
  s.in_dim = in;
  s.out_dim = out;
  return s;
}

namespace {

LayerSpec elementwise(LayerKind kind, std::size_t n) {
  LayerSpec s;
  s.kind = kind;
  s.in_dim = n;
  s.out_dim = n;
  return s;
}

}  // namespace

LayerSpec LayerSpec::relu(std::size_t n) { return elementwise(LayerKind::relu, n); }
LayerSpec LayerSpec::sigmoid(std::size_t n) { return elementwise(LayerKind::sigmoid, n); }
LayerSpec LayerSpec::softmax(std::size_t n) { return elementwise(LayerKind::softmax, n); }

LayerSpec LayerSpec::batchnorm(std::size_t n, bool affine) {
  auto s = elementwise(LayerKind::batchnorm, n);
  s.affine = affine;
  return s;
}

LayerSpec LayerSpec::gradient_reversal(std::size_t n, double weight) {
  auto s = elementwise(LayerKind::gradient_reversal, n);
  s.reversal_weight = weight;
  return s;
}

LayerSpec LayerSpec::da_layer(std::size_t n, bool affine) {
  auto s = elementwise(LayerKind::da_layer, n);
  s.affine = affine;
  return s;
}

std::string_view role_tag(Role role) {
  switch (role) {
    case Role::feature_extractor: return "Gf";
    case Role::label_predictor: return "Gy";
    case Role::domain_classifier: return "Gd";
    case Role::source_map: return "Ms";
    case Role::target_map: return "Mt";
    case Role::discriminator: return "D";
    case Role::classifier: return "C";
  }
  return "?";
}

void NetworkSpec::validate() const {
  if (layers.empty()) throw ShapeError("network " + std::string(role_tag(role)) + " has no layers");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    const std::string where = std::string(role_tag(role)) + " layer " + std::to_string(i) + " (" +
                              std::string(to_string(l.kind)) + ")";
    if (l.in_dim == 0 || l.out_dim == 0) throw ShapeError(where + ": dims must be positive");
    if (l.kind != LayerKind::linear && l.in_dim != l.out_dim) {
      throw ShapeError(where + ": in_dim must equal out_dim");
    }
    if (i + 1 < layers.size() && l.out_dim != layers[i + 1].in_dim) {
      throw ShapeError(where + ": out_dim " + std::to_string(l.out_dim) +
                       " does not match next layer in_dim " + std::to_string(layers[i + 1].in_dim));
    }
    if (l.kind == LayerKind::softmax && i + 1 != layers.size()) {
      throw ShapeError(where + ": softmax may only be the final layer");
    }
    if (l.kind == LayerKind::gradient_reversal && !(l.reversal_weight >= 0.0)) {
      throw ShapeError(where + ": reversal weight must be non-negative");
    }
    if ((l.kind == LayerKind::batchnorm || l.kind == LayerKind::da_layer) && !(l.eps > 0.0)) {
      throw ShapeError(where + ": eps must be positive");
    }
    if (l.kind == LayerKind::da_layer && l.pinned_alpha &&
        !(*l.pinned_alpha >= 0.5 && *l.pinned_alpha <= 1.0)) {
      throw ShapeError(where + ": pinned alpha must lie in [0.5, 1]");
    }
  }
}

std::size_t NetworkSpec::in_dim() const { return layers.empty() ? 0 : layers.front().in_dim; }
std::size_t NetworkSpec::out_dim() const { return layers.empty() ? 0 : layers.back().out_dim; }

void validate_composition(std::span<const NetworkSpec> nets) {
  std::set<Role> seen;
  for (const auto& n : nets) {
    n.validate();
    if (!seen.insert(n.role).second) {
      throw ShapeError("role " + std::string(role_tag(n.role)) + " appears twice in one model");
    }
    const bool predictor = n.role == Role::label_predictor || n.role == Role::classifier;
    for (const auto& l : n.layers) {
      if (l.kind == LayerKind::softmax && !predictor) {
        throw ShapeError("softmax in non-predictor network " + std::string(role_tag(n.role)));
      }
    }
  }
}

void Parameters::add(std::string name, Tensor value) {
  if (contains(name)) throw ShapeError("duplicate parameter name " + name);
  entries_.push_back({std::move(name), std::move(value)});
}

bool Parameters::contains(std::string_view name) const {
  return std::any_of(entries_.begin(), entries_.end(),
                     [&](const NamedTensor& e) { return e.name == name; });
}

Tensor& Parameters::at(std::string_view name) {
  for (auto& e : entries_) {
    if (e.name == name) return e.value;
  }
  throw ShapeError("missing parameter " + std::string(name));
}

const Tensor& Parameters::at(std::string_view name) const {
  for (const auto& e : entries_) {
    if (e.name == name) return e.value;
  }
  throw ShapeError("missing parameter " + std::string(name));
}

Parameters Parameters::zeros_like() const {
  Parameters z;
  for (const auto& e : entries_) z.add(e.name, Tensor(e.value.shape(), 0.0));
  return z;
}

std::uint64_t Parameters::fingerprint() const {
  std::uint64_t h = fnv1a(nullptr, 0);
  for (const auto& e : entries_) {
    h = fnv1a(e.name.data(), e.name.size(), h);
    for (auto d : e.value.shape()) {
      const std::uint64_t d64 = d;
      h = fnv1a(&d64, sizeof d64, h);
    }
    h = fnv1a(e.value.data().data(), e.value.size() * sizeof(double), h);
  }
  return h;
}

bool Parameters::all_finite() const {
  return std::all_of(entries_.begin(), entries_.end(),
                     [](const NamedTensor& e) { return e.value.all_finite(); });
}

std::string param_name(const NetworkSpec& net, std::size_t layer, std::string_view field) {
  return std::string(role_tag(net.role)) + "." + std::to_string(layer) + "." + std::string(field);
}

Parameters init_parameters(const NetworkSpec& net, std::uint64_t seed) {
  net.validate();
  Rng rng(seed);
  Parameters p;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const auto& l = net.layers[i];
    switch (l.kind) {
      case LayerKind::linear: {
        const double a = std::sqrt(6.0 / static_cast<double>(l.in_dim + l.out_dim));
        Tensor w = Tensor::matrix(l.out_dim, l.in_dim);
        for (auto& v : w.data()) v = rng.uniform(-a, a);
        p.add(param_name(net, i, "W"), std::move(w));
        p.add(param_name(net, i, "b"), Tensor::vector(l.out_dim));
        break;
      }
      case LayerKind::batchnorm:
      case LayerKind::da_layer:
        if (l.kind == LayerKind::da_layer) {
          p.add(param_name(net, i, "rho"), Tensor::vector(1, l.initial_rho));
        }
        if (l.affine) {
          p.add(param_name(net, i, "scale"), Tensor::vector(l.out_dim, 1.0));
          p.add(param_name(net, i, "shift"), Tensor::vector(l.out_dim, 0.0));
        }
        break;
      default: break;
    }
  }
  return p;
}

Buffers init_buffers(const NetworkSpec& net) {
  Buffers b;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const auto& l = net.layers[i];
    if (l.kind == LayerKind::batchnorm) {
      b.add(param_name(net, i, "running_mean"), Tensor::vector(l.out_dim, 0.0));
      b.add(param_name(net, i, "running_var"), Tensor::vector(l.out_dim, 1.0));
    } else if (l.kind == LayerKind::da_layer) {
      b.add(param_name(net, i, "running_mean_st"), Tensor::vector(l.out_dim, 0.0));
      b.add(param_name(net, i, "running_var_st"), Tensor::vector(l.out_dim, 1.0));
      b.add(param_name(net, i, "running_mean_ts"), Tensor::vector(l.out_dim, 0.0));
      b.add(param_name(net, i, "running_var_ts"), Tensor::vector(l.out_dim, 1.0));
    }
  }
  return b;
}

namespace {

using autodial::Moments;

std::uint64_t spec_signature(const NetworkSpec& net) {
  std::uint64_t h = fnv1a(nullptr, 0);
  const auto role = static_cast<int>(net.role);
  h = fnv1a(&role, sizeof role, h);
  for (const auto& l : net.layers) {
    const std::uint64_t parts[3] = {static_cast<std::uint64_t>(l.kind), l.in_dim, l.out_dim};
    h = fnv1a(parts, sizeof parts, h);
  }
  return h;
}

Tensor vec_tensor(const std::vector<double>& v) { return Tensor::from_vector(v); }

std::vector<double> tensor_vec(const Tensor& t) {
  return std::vector<double>(t.data().begin(), t.data().end());
}

void update_running(Tensor& running, const std::vector<double>& batch, double momentum) {
  for (std::size_t c = 0; c < running.size(); ++c) {
    running[c] = (1.0 - momentum) * running[c] + momentum * batch[c];
  }
}

void apply_affine(const NetworkSpec& net, std::size_t i, const Parameters& params, Tensor& y) {
  if (!net.layers[i].affine) return;
  const Tensor& scale = params.at(param_name(net, i, "scale"));
  const Tensor& shift = params.at(param_name(net, i, "shift"));
  for (std::size_t r = 0; r < y.rows(); ++r) {
    auto row = y.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) row[c] = row[c] * scale[c] + shift[c];
  }
}

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void softmax_inplace(Tensor& t) {
  for (std::size_t r = 0; r < t.rows(); ++r) {
    auto row = t.row(r);
    const double mx = *std::max_element(row.begin(), row.end());
    double s = 0.0;
    for (auto& v : row) {
      v = std::exp(v - mx);
      s += v;
    }
    for (auto& v : row) v /= s;
  }
}

Tensor forward_layer(const NetworkSpec& net, std::size_t i, const Parameters& params,
                     const Buffers& buffers, Buffers* update, const Tensor& x,
                     const ForwardContext& ctx, LayerCache& cache) {
  const auto& l = net.layers[i];
  switch (l.kind) {
    case LayerKind::linear: {
      const Tensor& w = params.at(param_name(net, i, "W"));
      const Tensor& b = params.at(param_name(net, i, "b"));
      Tensor y = matmul_transposed(x, w);
      for (std::size_t r = 0; r < y.rows(); ++r) {
        auto row = y.row(r);
        for (std::size_t c = 0; c < row.size(); ++c) row[c] += b[c];
      }
      return y;
    }
    case LayerKind::relu: {
      Tensor y = x;
      for (auto& v : y.data()) v = v > 0.0 ? v : 0.0;
      return y;
    }
    case LayerKind::sigmoid: {
      Tensor y = x;
      for (auto& v : y.data()) v = stable_sigmoid(v);
      return y;
    }
    case LayerKind::softmax: {
      Tensor y = x;
      softmax_inplace(y);
      return y;
    }
    case LayerKind::gradient_reversal: return x;
    case LayerKind::batchnorm: {
      Tensor y(x.shape(), 0.0);
      if (ctx.mode == Mode::train) {
        const Moments m = autodial::column_moments(x, 0, x.rows());
        const auto inv = autodial::inverse_std(m.var, l.eps);
        autodial::normalize_rows(x, 0, x.rows(), m.mean, inv, y);
        cache.tensors = {y, vec_tensor(m.mean), vec_tensor(inv)};
        if (update) {
          update_running(update->at(param_name(net, i, "running_mean")), m.mean, l.momentum);
          update_running(update->at(param_name(net, i, "running_var")), m.var, l.momentum);
        }
      } else {
        const auto mean = tensor_vec(buffers.at(param_name(net, i, "running_mean")));
        const auto inv =
            autodial::inverse_std(tensor_vec(buffers.at(param_name(net, i, "running_var"))), l.eps);
        autodial::normalize_rows(x, 0, x.rows(), mean, inv, y);
      }
      apply_affine(net, i, params, y);
      return y;
    }
    case LayerKind::da_layer: {
      Tensor y(x.shape(), 0.0);
      const double alpha =
          l.pinned_alpha ? *l.pinned_alpha
                         : autodial::alpha_from_rho(params.at(param_name(net, i, "rho"))[0]);
      cache.alpha = alpha;
      if (ctx.mode == Mode::train) {
        const std::size_t n = x.rows();
        const std::size_t ns = ctx.n_source;
        if (ns == kAllRows || ns == 0 || ns >= n) {
          throw ShapeError("da-layer in train mode needs non-empty source and target halves");
        }
        const Moments ms = autodial::column_moments(x, 0, ns);
        const Moments mt = autodial::column_moments(x, ns, n);
        const Moments st = autodial::mix_moments(ms, mt, alpha);
        const Moments ts = autodial::mix_moments(mt, ms, alpha);
        const auto inv_st = autodial::inverse_std(st.var, l.eps);
        const auto inv_ts = autodial::inverse_std(ts.var, l.eps);
        autodial::normalize_rows(x, 0, ns, st.mean, inv_st, y);
        autodial::normalize_rows(x, ns, n, ts.mean, inv_ts, y);
        cache.tensors = {y,
                         vec_tensor(ms.mean),
                         vec_tensor(ms.var),
                         vec_tensor(mt.mean),
                         vec_tensor(mt.var),
                         vec_tensor(st.mean),
                         vec_tensor(inv_st),
                         vec_tensor(ts.mean),
                         vec_tensor(inv_ts)};
        if (update) {
          update_running(update->at(param_name(net, i, "running_mean_st")), st.mean, l.momentum);
          update_running(update->at(param_name(net, i, "running_var_st")), st.var, l.momentum);
          update_running(update->at(param_name(net, i, "running_mean_ts")), ts.mean, l.momentum);
          update_running(update->at(param_name(net, i, "running_var_ts")), ts.var, l.momentum);
        }
      } else {
        const char* suffix = ctx.eval_domain == Domain::source ? "st" : "ts";
        const auto mean =
            tensor_vec(buffers.at(param_name(net, i, std::string("running_mean_") + suffix)));
        const auto inv = autodial::inverse_std(
            tensor_vec(buffers.at(param_name(net, i, std::string("running_var_") + suffix))),
            l.eps);
        autodial::normalize_rows(x, 0, x.rows(), mean, inv, y);
      }
      apply_affine(net, i, params, y);
      return y;
    }
  }
  throw ShapeError("unknown layer kind");
}

ForwardResult forward_impl(const NetworkSpec& net, const Parameters& params,
                           const Buffers& buffers, Buffers* update, const Tensor& input,
                           const ForwardContext& ctx) {
  net.validate();
  if (input.rank() != 2 || input.cols() != net.in_dim()) {
    throw ShapeError("input " + input.shape_string() + " does not match first layer in_dim " +
                     std::to_string(net.in_dim()));
  }
  ForwardResult res;
  res.tape.mode = ctx.mode;
  res.tape.n_source = ctx.n_source;
  res.tape.spec_signature = spec_signature(net);
  Tensor x = input;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    LayerCache cache;
    Tensor y = forward_layer(net, i, params, buffers, update, x, ctx, cache);
    if (!y.all_finite()) {
      throw NumericError("non-finite activation after " + std::string(role_tag(net.role)) +
                         " layer " + std::to_string(i) + " (" +
                         std::string(to_string(net.layers[i].kind)) + ")");
    }
    res.tape.inputs.push_back(std::move(x));
    res.tape.outputs.push_back(y);
    res.tape.caches.push_back(std::move(cache));
    x = std::move(y);
  }
  res.output = std::move(x);
  return res;
}

void affine_backward(const NetworkSpec& net, std::size_t i, const Parameters& params,
                     const Tensor& xhat, Tensor& g, Parameters& grads) {
  if (!net.layers[i].affine) return;
  const Tensor& scale = params.at(param_name(net, i, "scale"));
  Tensor& dscale = grads.at(param_name(net, i, "scale"));
  Tensor& dshift = grads.at(param_name(net, i, "shift"));
  for (std::size_t r = 0; r < g.rows(); ++r) {
    auto gr = g.row(r);
    auto xr = xhat.row(r);
    for (std::size_t c = 0; c < gr.size(); ++c) {
      dscale[c] += gr[c] * xr[c];
      dshift[c] += gr[c];
      gr[c] *= scale[c];
    }
  }
}

Tensor da_backward(const NetworkSpec& net, std::size_t i, const Parameters& params,
                   const Tape& tape, Tensor g, Parameters& grads) {
  const auto& l = net.layers[i];
  const Tensor& x = tape.inputs[i];
  const auto& t = tape.caches[i].tensors;
  const double alpha = tape.caches[i].alpha;
  affine_backward(net, i, params, t[0], g, grads);

  const std::size_t n = x.rows();
  const std::size_t ns = tape.n_source;
  const auto mean_s = tensor_vec(t[1]), var_s = tensor_vec(t[2]);
  const auto mean_t = tensor_vec(t[3]), var_t = tensor_vec(t[4]);
  const auto mean_st = tensor_vec(t[5]), inv_st = tensor_vec(t[6]);
  const auto mean_ts = tensor_vec(t[7]), inv_ts = tensor_vec(t[8]);

  Tensor dx(x.shape(), 0.0);
  std::vector<double> dmean_st, dvar_st, dmean_ts, dvar_ts;
  autodial::normalization_backward(g, x, 0, ns, mean_st, inv_st, dx, dmean_st, dvar_st);
  autodial::normalization_backward(g, x, ns, n, mean_ts, inv_ts, dx, dmean_ts, dvar_ts);

  const std::size_t cols = x.cols();
  const double a = alpha, b = 1.0 - alpha;
  std::vector<double> gms(cols), gmt(cols), gvs(cols), gvt(cols);
  double galpha = 0.0;
  for (std::size_t c = 0; c < cols; ++c) {
    const double d = mean_s[c] - mean_t[c];
    const double cross = 2.0 * a * b * d;
    const double dv_sum = dvar_st[c] + dvar_ts[c];
    gms[c] = a * dmean_st[c] + b * dmean_ts[c] + cross * dv_sum;
    gmt[c] = b * dmean_st[c] + a * dmean_ts[c] - cross * dv_sum;
    gvs[c] = a * dvar_st[c] + b * dvar_ts[c];
    gvt[c] = b * dvar_st[c] + a * dvar_ts[c];
    const double curv = (1.0 - 2.0 * a) * d * d;
    galpha += d * dmean_st[c] - d * dmean_ts[c] + (var_s[c] - var_t[c] + curv) * dvar_st[c] +
              (var_t[c] - var_s[c] + curv) * dvar_ts[c];
  }
  autodial::moments_backward(x, 0, ns, mean_s, gms, gvs, dx);
  autodial::moments_backward(x, ns, n, mean_t, gmt, gvt, dx);

  if (!l.pinned_alpha) {
    const double rho = params.at(param_name(net, i, "rho"))[0];
    grads.at(param_name(net, i, "rho"))[0] += galpha * autodial::dalpha_drho(rho);
  }
  return dx;
}

Tensor backward_layer(const NetworkSpec& net, std::size_t i, const Parameters& params,
                      const Tape& tape, Tensor g, Parameters& grads) {
  const auto& l = net.layers[i];
  const Tensor& x = tape.inputs[i];
  const Tensor& y = tape.outputs[i];
  switch (l.kind) {
    case LayerKind::linear: {
      const Tensor& w = params.at(param_name(net, i, "W"));
      Tensor& dw = grads.at(param_name(net, i, "W"));
      Tensor& db = grads.at(param_name(net, i, "b"));
      const std::size_t out = l.out_dim, in = l.in_dim;
      Tensor dx = Tensor::matrix(x.rows(), in);
      for (std::size_t r = 0; r < x.rows(); ++r) {
        auto gr = g.row(r);
        auto xr = x.row(r);
        auto dxr = dx.row(r);
        for (std::size_t o = 0; o < out; ++o) {
          const double go = gr[o];
          db[o] += go;
          auto wr = w.row(o);
          auto dwr = dw.row(o);
          for (std::size_t k = 0; k < in; ++k) {
            dwr[k] += go * xr[k];
            dxr[k] += go * wr[k];
          }
        }
      }
      return dx;
    }
    case LayerKind::relu: {
      for (std::size_t k = 0; k < g.size(); ++k) {
        if (!(x[k] > 0.0)) g[k] = 0.0;
      }
      return g;
    }
    case LayerKind::sigmoid: {
      for (std::size_t k = 0; k < g.size(); ++k) g[k] *= y[k] * (1.0 - y[k]);
      return g;
    }
    case LayerKind::softmax: {
      for (std::size_t r = 0; r < g.rows(); ++r) {
        auto gr = g.row(r);
        auto yr = y.row(r);
        double dot = 0.0;
        for (std::size_t c = 0; c < gr.size(); ++c) dot += gr[c] * yr[c];
        for (std::size_t c = 0; c < gr.size(); ++c) gr[c] = yr[c] * (gr[c] - dot);
      }
      return g;
    }
    case LayerKind::gradient_reversal: {
      g *= -l.reversal_weight;
      return g;
    }
    case LayerKind::batchnorm: {
      const auto& t = tape.caches[i].tensors;
      affine_backward(net, i, params, t[0], g, grads);
      const auto mean = tensor_vec(t[1]);
      const auto inv = tensor_vec(t[2]);
      Tensor dx(x.shape(), 0.0);
      std::vector<double> dmean, dvar;
      autodial::normalization_backward(g, x, 0, x.rows(), mean, inv, dx, dmean, dvar);
      autodial::moments_backward(x, 0, x.rows(), mean, dmean, dvar, dx);
      return dx;
    }
    case LayerKind::da_layer: return da_backward(net, i, params, tape, std::move(g), grads);
  }
  throw ShapeError("unknown layer kind");
}

}  // namespace

ForwardResult forward(const NetworkSpec& net, const Parameters& params, Buffers& buffers,
                      const Tensor& input, const ForwardContext& ctx) {
  return forward_impl(net, params, buffers, ctx.mode == Mode::train ? &buffers : nullptr, input,
                      ctx);
}

Tensor predict(const NetworkSpec& net, const Parameters& params, const Buffers& buffers,
               const Tensor& input, Domain domain) {
  ForwardContext ctx;
  ctx.mode = Mode::eval;
  ctx.eval_domain = domain;
  return forward_impl(net, params, buffers, nullptr, input, ctx).output;
}

BackwardResult backward(const NetworkSpec& net, const Parameters& params, const Tape& tape,
                        const Tensor& upstream, std::span<const LayerGradient> injected) {
  if (tape.mode != Mode::train) {
    throw TrainingError("backward needs activations saved by a train-mode forward");
  }
  if (tape.spec_signature != spec_signature(net) || tape.outputs.size() != net.layers.size()) {
    throw TrainingError("saved activations are stale or belong to a different network");
  }
  if (!upstream.same_shape(tape.outputs.back())) {
    throw ShapeError("upstream gradient " + upstream.shape_string() +
                     " does not match network output " + tape.outputs.back().shape_string());
  }
  for (const auto& inj : injected) {
    if (inj.layer >= net.layers.size() || !inj.grad.same_shape(tape.outputs[inj.layer])) {
      throw ShapeError("injected gradient does not match layer " + std::to_string(inj.layer));
    }
  }
  BackwardResult res;
  res.grads = params.zeros_like();
  Tensor g = upstream;
  for (std::size_t i = net.layers.size(); i-- > 0;) {
    for (const auto& inj : injected) {
      if (inj.layer == i) g += inj.grad;
    }
    g = backward_layer(net, i, params, tape, std::move(g), res.grads);
  }
  res.input_grad = std::move(g);
  return res;
}

NetworkSpec mlp(Role role, std::size_t in, std::span<const std::size_t> hidden, std::size_t out) {
  NetworkSpec net;
  net.role = role;
  std::size_t prev = in;
  for (auto h : hidden) {
    net.layers.push_back(LayerSpec::linear(prev, h));
    net.layers.push_back(LayerSpec::relu(h));
    prev = h;
  }
  net.layers.push_back(LayerSpec::linear(prev, out));
  net.validate();
  return net;
}

}  // namespace shiftbench
