#pragma once

#include "mpcrrl/nn/tensor.hpp"

namespace mpcrrl::nn {

// Moment accumulators for the bias-corrected Adam update.
struct OptimizerState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::size_t step = 0;
  ParamSet m;
  ParamSet v;
};

OptimizerState make_adam(const ParamSet& params, double lr);

// In-place bias-corrected update. Gradients must be finite and match the
// parameter shapes; params missing from `grads` are left untouched but
// still decay their moments.
void adam_step(ParamSet& params, const ParamSet& grads, OptimizerState& state);

}  // namespace mpcrrl::nn
