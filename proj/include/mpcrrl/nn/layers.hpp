#pragma once

#include <string>
#include <vector>

#include "mpcrrl/nn/tape.hpp"
#include "mpcrrl/nn/tensor.hpp"

namespace mpcrrl::nn {

// Fully connected net: tanh on hidden layers, linear output.
// sizes = {in, h1, ..., out}; parameters named "W0","b0","W1","b1",...
struct MlpSpec {
  std::vector<std::size_t> sizes;

  std::size_t layer_count() const { return sizes.size() - 1; }
  std::size_t input_size() const { return sizes.front(); }
  std::size_t output_size() const { return sizes.back(); }
};

ParamSet mlp_init(const MlpSpec& spec, Rng& rng);
ParamSet mlp_zeros(const MlpSpec& spec);

// Plain forward pass. Input may be a vector [in] or a batch matrix [in, B].
Tensor mlp_forward(const MlpSpec& spec, const ParamSet& params, const Tensor& input);

// Tape forward pass. `layers` gives (weight, bias) node ids per layer, which
// lets callers mix constant layers with layers derived from other nodes.
NodeId mlp_forward_tape(Tape& tape, const std::vector<std::pair<NodeId, NodeId>>& layers,
                        NodeId input);

// Registers every tensor of `params` and returns (weight, bias) node pairs
// in layer order, suitable for mlp_forward_tape.
std::vector<std::pair<NodeId, NodeId>> mlp_register(Tape& tape, const MlpSpec& spec,
                                                    const ParamSet& params,
                                                    const std::string& prefix,
                                                    bool trainable = true);

// Single LSTM cell, gate order (input, forget, cell, output).
// Parameters: "W_ih" [4H,in], "W_hh" [4H,H], "b_ih" [4H], "b_hh" [4H].
struct LstmSpec {
  std::size_t input = 0;
  std::size_t hidden = 0;
};

ParamSet lstm_init(const LstmSpec& spec, Rng& rng);

struct LstmState {
  Tensor h;
  Tensor c;
};

LstmState lstm_zero_state(const LstmSpec& spec);

// Plain step; returns the new state (output = h).
LstmState lstm_forward(const LstmSpec& spec, const ParamSet& params, const Tensor& input,
                       const LstmState& state);

struct LstmNodes {
  NodeId w_ih, w_hh, b_ih, b_hh;
};
LstmNodes lstm_register(Tape& tape, const ParamSet& params, const std::string& prefix,
                        bool trainable = true);

struct LstmStateNodes {
  NodeId h, c;
};
LstmStateNodes lstm_forward_tape(Tape& tape, const LstmNodes& nodes, NodeId input,
                                 const LstmStateNodes& state);

}  // namespace mpcrrl::nn
