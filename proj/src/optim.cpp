#include "shiftbench/optim.hpp"

#include <cmath>
#include <string>

#include "shiftbench/error.hpp"

namespace shiftbench {

std::string_view to_string(LrPolicy policy) {
  switch (policy) {
    case LrPolicy::inverse: return "inverse";
    case LrPolicy::step: return "step";
    case LrPolicy::fixed: return "fixed";
  }
  return "?";
}

LrPolicy parse_lr_policy(std::string_view name) {
  if (name == "inverse" || name == "inv") return LrPolicy::inverse;
  if (name == "step") return LrPolicy::step;
  if (name == "fixed") return LrPolicy::fixed;
  throw ConfigError("unknown lr policy '" + std::string(name) + "' (expected inverse|step|fixed)");
}

double LrSchedule::rate(std::size_t iteration) const {
  const double it = static_cast<double>(iteration);
  switch (policy) {
    case LrPolicy::inverse: return base_lr * std::pow(1.0 + gamma * it, -power);
    case LrPolicy::step: return base_lr * std::pow(gamma, it / step_size);
    case LrPolicy::fixed: return base_lr;
  }
  return base_lr;
}

void LrSchedule::validate() const {
  if (!(base_lr > 0.0) || !std::isfinite(base_lr)) throw ConfigError("lr.base_lr: must be > 0");
  switch (policy) {
    case LrPolicy::inverse:
      if (!(gamma >= 0.0)) throw ConfigError("lr.gamma: must be >= 0 for inverse policy");
      if (!(power >= 0.0)) throw ConfigError("lr.power: must be >= 0 for inverse policy");
      break;
    case LrPolicy::step:
      if (!(gamma > 0.0)) throw ConfigError("lr.gamma: must be > 0 for step policy");
      if (!(step_size > 0.0)) throw ConfigError("lr.step_size: must be > 0 for step policy");
      break;
    case LrPolicy::fixed: break;
  }
}

OptimizerState make_optimizer(const LrSchedule& schedule, double momentum, double weight_decay) {
  schedule.validate();
  OptimizerState opt;
  opt.schedule = schedule;
  opt.momentum = momentum;
  opt.weight_decay = weight_decay;
  return opt;
}

void sgd_step(OptimizerState& opt, Parameters& params, const Parameters& grads) {
  const double lr = opt.schedule.rate(opt.iteration);
  if (!(lr > 0.0) || !std::isfinite(lr)) {
    throw NumericError("learning rate " + std::to_string(lr) + " at iteration " +
                       std::to_string(opt.iteration) + " is not positive");
  }
  for (auto& [name, g] : grads.entries()) {
    if (!g.all_finite()) throw NumericError("non-finite gradient for " + name);
  }
  for (auto& [name, p] : params.entries()) {
    if (!grads.contains(name)) continue;
    const Tensor& g = grads.at(name);
    if (!g.same_shape(p)) throw ShapeError("gradient shape mismatch for " + name);
    if (!opt.velocity.contains(name)) opt.velocity.add(name, Tensor(p.shape(), 0.0));
    Tensor& v = opt.velocity.at(name);
    for (std::size_t i = 0; i < p.size(); ++i) {
      double gi = g[i];
      if (opt.weight_decay != 0.0) gi += opt.weight_decay * p[i];
      v[i] = opt.momentum * v[i] - lr * gi;
      p[i] += v[i];
    }
    if (!p.all_finite()) throw NumericError("non-finite update for " + name);
  }
  ++opt.iteration;
}

}  // namespace shiftbench
