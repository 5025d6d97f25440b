#include "shiftbench/mkmmd.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "shiftbench/error.hpp"
#include "shiftbench/losses.hpp"

namespace shiftbench::mmd {

KernelBank KernelBank::uniform(std::vector<double> gammas) {
  KernelBank b;
  const double w = 1.0 / static_cast<double>(gammas.size());
  b.betas.assign(gammas.size(), w);
  b.gammas = std::move(gammas);
  b.validate();
  return b;
}

void KernelBank::validate() const {
  if (gammas.empty()) throw ConfigError("kernel bank needs at least one bandwidth");
  if (betas.size() != gammas.size()) throw ConfigError("kernel bank: betas/gammas size mismatch");
  double s = 0.0;
  for (std::size_t u = 0; u < gammas.size(); ++u) {
    if (!(gammas[u] > 0.0) || !std::isfinite(gammas[u])) {
      throw ConfigError("kernel bank: gamma must be positive and finite");
    }
    if (!(betas[u] >= 0.0)) throw ConfigError("kernel bank: beta must be non-negative");
    s += betas[u];
  }
  if (std::abs(s - 1.0) > 1e-9) throw ConfigError("kernel bank: betas must sum to 1");
}

namespace {

double sq_dist(std::span<const double> x, std::span<const double> y) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - y[i];
    s += d * d;
  }
  return s;
}

double bank_kernel(const KernelBank& bank, double d2) {
  double k = 0.0;
  for (std::size_t u = 0; u < bank.size(); ++u) k += bank.betas[u] * std::exp(-d2 / bank.gammas[u]);
  return k;
}

// Adds w * d k(x, y) / d x to gx and the negation to gy.
void accumulate_kernel_grad(const KernelBank& bank, std::span<const double> x,
                            std::span<const double> y, double w, std::span<double> gx,
                            std::span<double> gy) {
  const double d2 = sq_dist(x, y);
  double coef = 0.0;
  for (std::size_t u = 0; u < bank.size(); ++u) {
    coef += bank.betas[u] * std::exp(-d2 / bank.gammas[u]) * (-2.0 / bank.gammas[u]);
  }
  coef *= w;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double g = coef * (x[i] - y[i]);
    gx[i] += g;
    gy[i] -= g;
  }
}

}  // namespace

double gaussian_kernel(std::span<const double> x, std::span<const double> y, double gamma) {
  if (x.size() != y.size()) throw ShapeError("gaussian_kernel: dimension mismatch");
  if (!(gamma > 0.0)) throw ConfigError("gaussian_kernel: gamma must be positive");
  return std::exp(-sq_dist(x, y) / gamma);
}

KernelBank median_heuristic_bank(const Tensor& source, const Tensor& target,
                                 std::span<const double> multipliers, std::size_t max_rows) {
  if (source.cols() != target.cols()) throw ShapeError("median_heuristic_bank: dim mismatch");
  std::vector<std::span<const double>> rows;
  for (std::size_t r = 0; r < std::min(max_rows, source.rows()); ++r) rows.push_back(source.row(r));
  for (std::size_t r = 0; r < std::min(max_rows, target.rows()); ++r) rows.push_back(target.row(r));
  std::vector<double> d2;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = i + 1; j < rows.size(); ++j) d2.push_back(sq_dist(rows[i], rows[j]));
  }
  double median = 1.0;
  if (!d2.empty()) {
    auto mid = d2.begin() + static_cast<std::ptrdiff_t>(d2.size() / 2);
    std::nth_element(d2.begin(), mid, d2.end());
    median = *mid;
  }
  if (!(median > 0.0)) median = 1.0;
  std::vector<double> gammas;
  for (double m : multipliers) gammas.push_back(median * m);
  return KernelBank::uniform(std::move(gammas));
}

LinearMmd mmd_linear(const KernelBank& bank, const Tensor& source, const Tensor& target) {
  bank.validate();
  if (source.cols() != target.cols()) {
    throw ShapeError("mmd_linear: source dim " + std::to_string(source.cols()) +
                     " != target dim " + std::to_string(target.cols()));
  }
  if (source.rows() < 2 || target.rows() < 2) {
    throw ShapeError("mmd_linear needs at least 2 samples per domain");
  }
  const std::size_t n = std::min(source.rows(), target.rows()) / 2 * 2;
  const std::size_t tuples = n / 2;
  const std::size_t m = bank.size();
  LinearMmd res;
  res.used = n;
  res.grad_source = Tensor(source.shape(), 0.0);
  res.grad_target = Tensor(target.shape(), 0.0);
  res.g_values = Tensor::matrix(m, tuples);
  const double scale = 2.0 / static_cast<double>(n);
  double total = 0.0;
  for (std::size_t i = 0; i < tuples; ++i) {
    const std::size_t a = 2 * i, b = 2 * i + 1;
    auto s1 = source.row(a), s2 = source.row(b);
    auto t1 = target.row(a), t2 = target.row(b);
    const double d_ss = sq_dist(s1, s2), d_tt = sq_dist(t1, t2);
    const double d_st = sq_dist(s1, t2), d_ts = sq_dist(s2, t1);
    for (std::size_t u = 0; u < m; ++u) {
      const double gm = bank.gammas[u];
      res.g_values(u, i) =
          std::exp(-d_ss / gm) + std::exp(-d_tt / gm) - std::exp(-d_st / gm) - std::exp(-d_ts / gm);
    }
    total += bank_kernel(bank, d_ss) + bank_kernel(bank, d_tt) - bank_kernel(bank, d_st) -
             bank_kernel(bank, d_ts);
    accumulate_kernel_grad(bank, s1, s2, scale, res.grad_source.row(a), res.grad_source.row(b));
    accumulate_kernel_grad(bank, t1, t2, scale, res.grad_target.row(a), res.grad_target.row(b));
    accumulate_kernel_grad(bank, s1, t2, -scale, res.grad_source.row(a), res.grad_target.row(b));
    accumulate_kernel_grad(bank, s2, t1, -scale, res.grad_source.row(b), res.grad_target.row(a));
  }
  res.value = scale * total;
  return res;
}

double mmd_quadratic_oracle(const KernelBank& bank, const Tensor& source, const Tensor& target) {
  bank.validate();
  if (source.cols() != target.cols()) throw ShapeError("mmd_quadratic_oracle: dim mismatch");
  const std::size_t ns = source.rows(), nt = target.rows();
  if (ns < 2 || nt < 2) throw ShapeError("mmd_quadratic_oracle needs at least 2 samples per domain");
  double ss = 0.0, tt = 0.0, st = 0.0;
  for (std::size_t i = 0; i < ns; ++i) {
    for (std::size_t j = i + 1; j < ns; ++j) ss += bank_kernel(bank, sq_dist(source.row(i), source.row(j)));
  }
  for (std::size_t i = 0; i < nt; ++i) {
    for (std::size_t j = i + 1; j < nt; ++j) tt += bank_kernel(bank, sq_dist(target.row(i), target.row(j)));
  }
  for (std::size_t i = 0; i < ns; ++i) {
    for (std::size_t j = 0; j < nt; ++j) st += bank_kernel(bank, sq_dist(source.row(i), target.row(j)));
  }
  const double dns = static_cast<double>(ns), dnt = static_cast<double>(nt);
  return 2.0 * ss / (dns * (dns - 1.0)) + 2.0 * tt / (dnt * (dnt - 1.0)) - 2.0 * st / (dns * dnt);
}

Tensor variance_q(const Tensor& g_values) {
  if (g_values.rank() != 2 || g_values.cols() < 2) {
    throw ShapeError("variance_q needs at least 2 quad-tuples");
  }
  const std::size_t m = g_values.rows(), tuples = g_values.cols();
  const std::size_t pairs = tuples / 2;
  const double n = 2.0 * static_cast<double>(tuples);
  Tensor q = Tensor::matrix(m, m);
  for (std::size_t i = 0; i < pairs; ++i) {
    for (std::size_t u = 0; u < m; ++u) {
      const double du = g_values(u, 2 * i) - g_values(u, 2 * i + 1);
      for (std::size_t v = 0; v < m; ++v) {
        q(u, v) += du * (g_values(v, 2 * i) - g_values(v, 2 * i + 1));
      }
    }
  }
  q *= 4.0 / n;
  return q;
}

BetaQp beta_qp(std::span<const double> d, const Tensor& q, double eps) {
  const std::size_t m = d.size();
  if (m == 0 || m > 16) throw ConfigError("beta_qp supports 1..16 kernels");
  if (q.rank() != 2 || q.rows() != m || q.cols() != m) throw ShapeError("beta_qp: Q must be m x m");
  for (std::size_t u = 0; u < m; ++u) {
    for (std::size_t v = 0; v < m; ++v) {
      if (std::abs(q(u, v) - q(v, u)) > 1e-9 * (1.0 + std::abs(q(u, v)))) {
        throw ShapeError("beta_qp: Q is not symmetric");
      }
    }
  }
  BetaQp res;
  if (std::none_of(d.begin(), d.end(), [](double v) { return v > 0.0; })) {
    res.fallback = true;
    res.bank_beta.assign(m, 1.0 / static_cast<double>(m));
    res.qp_beta = res.bank_beta;
    return res;
  }

  Eigen::MatrixXd a(m, m);
  for (std::size_t u = 0; u < m; ++u) {
    for (std::size_t v = 0; v < m; ++v) a(u, v) = q(u, v) + (u == v ? eps : 0.0);
  }
  Eigen::VectorXd dv(m);
  for (std::size_t u = 0; u < m; ++u) dv(u) = d[u];

  // On a fixed support S the equality-constrained minimizer is
  // A_SS^{-1} d_S / (d_S^T A_SS^{-1} d_S); keep the best feasible one.
  double best = std::numeric_limits<double>::infinity();
  Eigen::VectorXd best_beta = Eigen::VectorXd::Zero(m);
  for (std::uint32_t mask = 1; mask < (1u << m); ++mask) {
    std::vector<std::size_t> support;
    for (std::size_t u = 0; u < m; ++u) {
      if (mask & (1u << u)) support.push_back(u);
    }
    const auto k = static_cast<Eigen::Index>(support.size());
    Eigen::MatrixXd as(k, k);
    Eigen::VectorXd ds(k);
    for (Eigen::Index i = 0; i < k; ++i) {
      ds(i) = dv(static_cast<Eigen::Index>(support[i]));
      for (Eigen::Index j = 0; j < k; ++j) {
        as(i, j) = a(static_cast<Eigen::Index>(support[i]), static_cast<Eigen::Index>(support[j]));
      }
    }
    const Eigen::VectorXd x = as.completeOrthogonalDecomposition().solve(ds);
    if ((as * x - ds).norm() > 1e-9 * (1.0 + ds.norm())) continue;
    const double denom = ds.dot(x);
    if (!(denom > 0.0)) continue;
    const Eigen::VectorXd bs = x / denom;
    if (bs.minCoeff() < -1e-12) continue;
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(m);
    for (Eigen::Index i = 0; i < k; ++i) {
      beta(static_cast<Eigen::Index>(support[i])) = std::max(0.0, bs(i));
    }
    beta /= dv.dot(beta);
    const double obj = beta.dot(a * beta);
    if (obj < best) {
      best = obj;
      best_beta = beta;
    }
  }
  if (!std::isfinite(best)) throw NumericError("beta_qp: no feasible support found");

  const Eigen::VectorXd grad = 2.0 * a * best_beta;
  const double nu = best_beta.dot(grad);  // uses d^T beta = 1
  const Eigen::VectorXd mu = grad - nu * dv;
  for (std::size_t u = 0; u < m; ++u) {
    const auto i = static_cast<Eigen::Index>(u);
    const double b = best_beta(i);
    res.qp_beta.push_back(b);
    if (b > 0.0) {
      res.stationarity = std::max(res.stationarity, std::abs(mu(i)));
    } else {
      res.stationarity = std::max(res.stationarity, std::max(0.0, -mu(i)));
    }
    res.complementarity = std::max(res.complementarity, std::abs(mu(i) * b));
    res.primal = std::max(res.primal, std::max(0.0, -b));
  }
  res.primal = std::max(res.primal, std::abs(dv.dot(best_beta) - 1.0));
  res.objective = best;
  const double total = best_beta.sum();
  for (double b : res.qp_beta) res.bank_beta.push_back(b / total);
  return res;
}

void DanConfig::validate(const NetworkSpec& net) const {
  if (!(lambda >= 0.0)) throw ConfigError("loss_weights.mmd: must be >= 0");
  if (!(qp_eps >= 0.0)) throw ConfigError("dan.qp_eps: must be >= 0");
  if (bandwidth_multipliers.empty()) throw ConfigError("dan.bandwidth_multipliers: empty");
  for (auto l : adapted_layers) {
    if (l >= net.layers.size()) {
      throw ConfigError("dan.adapted_layers: layer " + std::to_string(l) + " does not exist");
    }
  }
}

std::vector<std::size_t> default_adapted_layers(const NetworkSpec& net) {
  std::vector<std::size_t> out;
  const std::size_t last = net.layers.size() - 1;
  for (std::size_t i = last; i-- > 0;) {
    if (net.layers[i].kind == LayerKind::relu) {
      out.push_back(i);
      break;
    }
  }
  out.push_back(last);
  return out;
}

DanResult dan_train(Model model, const Dataset& source, const Dataset& target,
                    const DanConfig& dan, const TrainConfig& cfg) {
  cfg.validate();
  dan.validate(model.spec);
  const std::size_t half = cfg.batch_size / 2 * 2;
  if (half < 2) throw ConfigError("batch_size: DAN needs at least 2 samples per domain");
  auto opt = cfg.optimizer();
  BatchSampler src(source.size(), half, derive_seed(cfg.seed, streams::source_batches));
  BatchSampler tgt(target.size(), half, derive_seed(cfg.seed, streams::target_batches));

  DanResult res;
  const auto& layers = dan.adapted_layers;
  // Bandwidths from the initial representations of both domains.
  {
    Buffers scratch = model.buffers;
    ForwardContext ctx;
    ctx.mode = Mode::eval;
    const auto hs = forward(model.spec, model.params, scratch, source.x, ctx);
    const auto ht = forward(model.spec, model.params, scratch, target.x, ctx);
    for (auto l : layers) {
      res.banks.push_back(median_heuristic_bank(hs.tape.outputs[l], ht.tape.outputs[l],
                                                dan.bandwidth_multipliers));
    }
  }

  res.log.columns = {"epoch", "train_loss"};
  for (auto l : layers) res.log.columns.push_back("mmd_layer" + std::to_string(l));
  res.log.columns.insert(res.log.columns.end(), {"source_acc", "target_acc"});

  std::vector<std::vector<std::vector<double>>> gacc(layers.size());  // layer -> kernel -> g
  auto reset_acc = [&] {
    for (std::size_t k = 0; k < layers.size(); ++k) {
      gacc[k].assign(res.banks[k].size(), {});
    }
  };
  auto update_betas = [&] {
    for (std::size_t k = 0; k < layers.size(); ++k) {
      auto& bank = res.banks[k];
      const std::size_t tuples = gacc[k].empty() ? 0 : gacc[k][0].size();
      if (tuples < 2) continue;
      Tensor g = Tensor::matrix(bank.size(), tuples);
      std::vector<double> dvec(bank.size(), 0.0);
      for (std::size_t u = 0; u < bank.size(); ++u) {
        for (std::size_t i = 0; i < tuples; ++i) {
          g(u, i) = gacc[k][u][i];
          dvec[u] += gacc[k][u][i];
        }
        dvec[u] /= static_cast<double>(tuples);
      }
      const auto qp = beta_qp(dvec, variance_q(g), dan.qp_eps);
      bank.betas = qp.bank_beta;
    }
    reset_acc();
  };
  reset_acc();

  ForwardContext ctx;
  ctx.mode = Mode::train;
  ctx.n_source = half;
  const std::size_t iters = src.batches_per_epoch();
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    double loss_sum = 0.0;
    std::vector<double> mmd_sum(layers.size(), 0.0);
    for (std::size_t it = 0; it < iters; ++it) {
      const auto is = src.next();
      const auto it_idx = tgt.next();
      std::vector<int> ys;
      for (auto i : is) ys.push_back(source.y[i]);
      const Tensor x = stack_domains(source.x.gather_rows(is), target.x.gather_rows(it_idx));
      auto fwd = forward(model.spec, model.params, model.buffers, x, ctx);

      const auto ce = cross_entropy_loss(softmax_rows(fwd.output.slice_rows(0, half)), ys);
      Tensor upstream(fwd.output.shape(), 0.0);
      for (std::size_t r = 0; r < half; ++r) {
        for (std::size_t c = 0; c < upstream.cols(); ++c) upstream(r, c) = ce.grad(r, c);
      }
      double loss = ce.value;
      std::vector<LayerGradient> injected;
      for (std::size_t k = 0; k < layers.size(); ++k) {
        const Tensor& h = fwd.tape.outputs[layers[k]];
        auto est = mmd_linear(res.banks[k], h.slice_rows(0, half), h.slice_rows(half, h.rows()));
        loss += dan.lambda * est.value;
        mmd_sum[k] += est.value;
        Tensor gh = stack_domains(est.grad_source, est.grad_target);
        gh *= dan.lambda;
        injected.push_back({layers[k], std::move(gh)});
        for (std::size_t u = 0; u < est.g_values.rows(); ++u) {
          for (std::size_t i = 0; i < est.g_values.cols(); ++i) {
            gacc[k][u].push_back(est.g_values(u, i));
          }
        }
      }
      check_loss(loss, "DAN risk", epoch, opt.iteration);
      loss_sum += loss;
      auto bwd = backward(model.spec, model.params, fwd.tape, upstream, injected);
      sgd_step(opt, model.params, bwd.grads);
      if (dan.beta_cadence > 0 && opt.iteration % dan.beta_cadence == 0) update_betas();
    }
    if (dan.beta_cadence == 0) update_betas();
    std::vector<double> row{static_cast<double>(epoch), loss_sum / static_cast<double>(iters)};
    for (double s : mmd_sum) row.push_back(s / static_cast<double>(iters));
    row.push_back(evaluate_accuracy(model, source, Domain::source));
    row.push_back(evaluate_accuracy(model, target, Domain::target));
    res.log.rows.push_back(std::move(row));
  }
  res.source_accuracy = evaluate_accuracy(model, source, Domain::source);
  res.target_accuracy = evaluate_accuracy(model, target, Domain::target);
  res.model = std::move(model);
  return res;
}

}  // namespace shiftbench::mmd
