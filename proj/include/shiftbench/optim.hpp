#pragma once

#include <cstddef>
#include <string_view>

#include "shiftbench/nn.hpp"

namespace shiftbench {

enum class LrPolicy { inverse, step, fixed };

std::string_view to_string(LrPolicy policy);
LrPolicy parse_lr_policy(std::string_view name);

/// Learning-rate schedule.
///   inverse: base_lr * (1 + gamma * iter)^(-power)
///   step:    base_lr * gamma^(iter / step_size)
///   fixed:   base_lr
struct LrSchedule {
  LrPolicy policy = LrPolicy::fixed;
  double base_lr = 0.01;
  double gamma = 0.001;
  double power = 0.75;
  double step_size = 1.0;

  double rate(std::size_t iteration) const;
  void validate() const;
};

struct OptimizerState {
  LrSchedule schedule;
  double momentum = 0.9;
  double weight_decay = 0.0;
  std::size_t iteration = 0;
  Parameters velocity;  // created lazily, mirrors the parameter list
};

OptimizerState make_optimizer(const LrSchedule& schedule, double momentum = 0.9,
                              double weight_decay = 0.0);

/// v <- m*v - lr(iter)*(g + wd*p); p <- p + v; iter <- iter + 1.
/// Parameters without a gradient entry are left alone.
void sgd_step(OptimizerState& opt, Parameters& params, const Parameters& grads);

}  // namespace shiftbench
