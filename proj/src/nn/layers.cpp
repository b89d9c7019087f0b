#include "mpcrrl/nn/layers.hpp"

#include <cmath>

namespace mpcrrl::nn {

namespace {

Tensor uniform_tensor(std::vector<std::size_t> shape, double bound, Rng& rng) {
  Tensor t(std::move(shape));
  for (double& x : t.values()) x = rng.uniform(-bound, bound);
  return t;
}

void check_mlp_params(const MlpSpec& spec, const ParamSet& params) {
  for (std::size_t l = 0; l < spec.layer_count(); ++l) {
    const std::string wl = "W" + std::to_string(l);
    const std::string bl = "b" + std::to_string(l);
    if (!params.has(wl) || !params.has(bl))
      throw DimensionError("mlp: params missing layer " + std::to_string(l));
    const Tensor& W = params.get(wl);
    if (W.rows() != spec.sizes[l + 1] || W.cols() != spec.sizes[l])
      throw DimensionError("mlp: weight " + wl + " has shape " + shape_string(W.shape()));
  }
}

}  // namespace

ParamSet mlp_init(const MlpSpec& spec, Rng& rng) {
  ParamSet params;
  for (std::size_t l = 0; l < spec.layer_count(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(spec.sizes[l]));
    params.add("W" + std::to_string(l), uniform_tensor({spec.sizes[l + 1], spec.sizes[l]}, bound, rng));
    params.add("b" + std::to_string(l), uniform_tensor({spec.sizes[l + 1]}, bound, rng));
  }
  return params;
}

ParamSet mlp_zeros(const MlpSpec& spec) {
  ParamSet params;
  for (std::size_t l = 0; l < spec.layer_count(); ++l) {
    params.add("W" + std::to_string(l), Tensor::zeros({spec.sizes[l + 1], spec.sizes[l]}));
    params.add("b" + std::to_string(l), Tensor::zeros({spec.sizes[l + 1]}));
  }
  return params;
}

Tensor mlp_forward(const MlpSpec& spec, const ParamSet& params, const Tensor& input) {
  check_mlp_params(spec, params);
  if (!input.finite()) throw DomainError("mlp_forward: non-finite input");
  const bool batched = input.rank() == 2;
  if ((batched ? input.rows() : input.size()) != spec.input_size())
    throw DimensionError("mlp_forward: input size " + std::to_string(input.size()) +
                         " does not match layer spec " + std::to_string(spec.input_size()));

  Tensor x = input;
  for (std::size_t l = 0; l < spec.layer_count(); ++l) {
    const Tensor& W = params.get("W" + std::to_string(l));
    const Tensor& b = params.get("b" + std::to_string(l));
    Tensor y = batched ? Tensor({W.rows(), x.cols()}) : Tensor({W.rows()});
    if (batched) {
      y.mat() = W.mat() * x.mat();
      y.mat().colwise() += b.vec();
    } else {
      y.vec() = W.mat() * x.vec() + b.vec();
    }
    if (l + 1 < spec.layer_count()) {
      for (double& v : y.values()) v = std::tanh(v);
    }
    x = std::move(y);
  }
  return x;
}

std::vector<std::pair<NodeId, NodeId>> mlp_register(Tape& tape, const MlpSpec& spec,
                                                    const ParamSet& params,
                                                    const std::string& prefix, bool trainable) {
  check_mlp_params(spec, params);
  std::vector<std::pair<NodeId, NodeId>> layers;
  for (std::size_t l = 0; l < spec.layer_count(); ++l) {
    const std::string wl = "W" + std::to_string(l);
    const std::string bl = "b" + std::to_string(l);
    NodeId w = trainable ? tape.param(prefix + wl, params.get(wl)) : tape.constant(params.get(wl));
    NodeId b = trainable ? tape.param(prefix + bl, params.get(bl)) : tape.constant(params.get(bl));
    layers.emplace_back(w, b);
  }
  return layers;
}

NodeId mlp_forward_tape(Tape& tape, const std::vector<std::pair<NodeId, NodeId>>& layers,
                        NodeId input) {
  NodeId x = input;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    NodeId y = tape.matmul(layers[l].first, x);
    if (tape.value(y).rank() == 2)
      y = tape.col_add_vec(y, layers[l].second);
    else
      y = tape.add(y, layers[l].second);
    if (l + 1 < layers.size()) y = tape.tanh_(y);
    x = y;
  }
  return x;
}

ParamSet lstm_init(const LstmSpec& spec, Rng& rng) {
  ParamSet params;
  const double bound = 1.0 / std::sqrt(static_cast<double>(spec.hidden));
  params.add("W_ih", uniform_tensor({4 * spec.hidden, spec.input}, bound, rng));
  params.add("W_hh", uniform_tensor({4 * spec.hidden, spec.hidden}, bound, rng));
  params.add("b_ih", uniform_tensor({4 * spec.hidden}, bound, rng));
  params.add("b_hh", uniform_tensor({4 * spec.hidden}, bound, rng));
  return params;
}

LstmState lstm_zero_state(const LstmSpec& spec) {
  return {Tensor::zeros({spec.hidden}), Tensor::zeros({spec.hidden})};
}

LstmState lstm_forward(const LstmSpec& spec, const ParamSet& params, const Tensor& input,
                       const LstmState& state) {
  const std::size_t H = spec.hidden;
  if (state.h.size() != H || state.c.size() != H)
    throw DimensionError("lstm_forward: hidden state size " + std::to_string(state.h.size()) +
                         " does not match configured size " + std::to_string(H));
  if (input.size() != spec.input) throw DimensionError("lstm_forward: input size mismatch");

  const Tensor& w_ih = params.get("W_ih");
  const Tensor& w_hh = params.get("W_hh");
  Eigen::VectorXd gates = w_ih.mat() * input.vec() + params.get("b_ih").vec() +
                          w_hh.mat() * state.h.vec() + params.get("b_hh").vec();

  LstmState next = {Tensor::zeros({H}), Tensor::zeros({H})};
  for (std::size_t j = 0; j < H; ++j) {
    const double i = 1.0 / (1.0 + std::exp(-gates[static_cast<Eigen::Index>(j)]));
    const double f = 1.0 / (1.0 + std::exp(-gates[static_cast<Eigen::Index>(H + j)]));
    const double g = std::tanh(gates[static_cast<Eigen::Index>(2 * H + j)]);
    const double o = 1.0 / (1.0 + std::exp(-gates[static_cast<Eigen::Index>(3 * H + j)]));
    next.c[j] = f * state.c[j] + i * g;
    next.h[j] = o * std::tanh(next.c[j]);
  }
  return next;
}

LstmNodes lstm_register(Tape& tape, const ParamSet& params, const std::string& prefix,
                        bool trainable) {
  auto reg = [&](const char* name) {
    return trainable ? tape.param(prefix + name, params.get(name))
                     : tape.constant(params.get(name));
  };
  return {reg("W_ih"), reg("W_hh"), reg("b_ih"), reg("b_hh")};
}

LstmStateNodes lstm_forward_tape(Tape& tape, const LstmNodes& nodes, NodeId input,
                                 const LstmStateNodes& state) {
  const std::size_t H = tape.value(state.h).size();
  NodeId gates = tape.add(tape.add(tape.matmul(nodes.w_ih, input), nodes.b_ih),
                          tape.add(tape.matmul(nodes.w_hh, state.h), nodes.b_hh));
  NodeId i = tape.sigmoid(tape.slice(gates, 0, H));
  NodeId f = tape.sigmoid(tape.slice(gates, H, H));
  NodeId g = tape.tanh_(tape.slice(gates, 2 * H, H));
  NodeId o = tape.sigmoid(tape.slice(gates, 3 * H, H));
  NodeId c = tape.add(tape.mul(f, state.c), tape.mul(i, g));
  NodeId h = tape.mul(o, tape.tanh_(c));
  return {h, c};
}

}  // namespace mpcrrl::nn
