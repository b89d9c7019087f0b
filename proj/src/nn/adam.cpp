#include "mpcrrl/nn/adam.hpp"

#include <cmath>

namespace mpcrrl::nn {

OptimizerState make_adam(const ParamSet& params, double lr) {
  OptimizerState state;
  state.lr = lr;
  for (const auto& [name, t] : params) {
    state.m.add(name, Tensor::zeros_like(t));
    state.v.add(name, Tensor::zeros_like(t));
  }
  return state;
}

void adam_step(ParamSet& params, const ParamSet& grads, OptimizerState& state) {
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(state.beta1, t);
  const double bc2 = 1.0 - std::pow(state.beta2, t);

  for (auto& [name, p] : params) {
    Tensor& m = state.m.get(name);
    Tensor& v = state.v.get(name);
    if (!grads.has(name)) {
      m.vec() *= state.beta1;
      v.vec() *= state.beta2;
      continue;
    }
    const Tensor& g = grads.get(name);
    if (!g.same_shape(p))
      throw DimensionError("adam_step: gradient shape " + shape_string(g.shape()) +
                           " does not match parameter " + name + " " + shape_string(p.shape()));
    if (!g.finite()) throw NumericError("adam_step: non-finite gradient for " + name);

    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      p[i] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
    }
  }
}

}  // namespace mpcrrl::nn
