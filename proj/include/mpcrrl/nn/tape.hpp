#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "mpcrrl/nn/tensor.hpp"

namespace mpcrrl::nn {

using NodeId = std::size_t;
inline constexpr NodeId kNoNode = std::numeric_limits<NodeId>::max();

enum class Op : std::uint8_t {
  Constant,
  Param,
  Add,
  Sub,
  Mul,
  Scale,      // c0 * a
  AddScalar,  // a + c0
  MatMul,     // a [m,n] x b ([n] or [n,k])
  ColAddVec,  // a [m,k] + b [m] broadcast over columns
  Tanh,
  Sigmoid,
  Sin,
  Cos,
  Sqrt,
  Log,
  Exp,
  Softplus,
  Sum,      // all elements -> scalar
  Slice,    // flat range [c_offset, c_offset+len)
  Concat,   // flatten-and-join of `many`
  Reshape,  // same data, new shape
  Clamp,    // clamp(a, c0, c1)
  Minimum,  // elementwise min(a, b)
};

// Reverse-mode tape. Nodes are appended in evaluation order, so creation
// order is a topological order and one reverse sweep per seed suffices.
// Single-threaded, single-use per rollout; see module docs.
class Tape {
 public:
  NodeId constant(Tensor value);
  NodeId param(const std::string& name, const Tensor& value);

  const Tensor& value(NodeId id) const { return nodes_[id].value; }
  std::size_t size() const { return nodes_.size(); }

  // Seeds d(loss)/d(loss)=1 and sweeps once. Loss must be scalar and finite.
  void backward(NodeId loss);
  // General vector-Jacobian product seed; usable repeatedly on one tape.
  void backward_seed(NodeId node, const Tensor& seed);

  // Adjoint of any node after a backward pass. Unreached nodes hold zeros.
  const Tensor& adjoint(NodeId id) const;

  // Gradients of all registered params, keyed by registration name.
  // Params never reached from the loss get zero gradients.
  ParamSet param_gradients() const;

  const std::vector<std::pair<std::string, NodeId>>& params() const { return params_; }

  // -- op builders --
  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);
  NodeId scale(NodeId a, double c);
  NodeId add_scalar(NodeId a, double c);
  NodeId matmul(NodeId a, NodeId b);
  NodeId col_add_vec(NodeId m, NodeId v);
  NodeId tanh_(NodeId a);
  NodeId sigmoid(NodeId a);
  NodeId sin_(NodeId a);
  NodeId cos_(NodeId a);
  NodeId sqrt_(NodeId a);
  NodeId log_(NodeId a);
  NodeId exp_(NodeId a);
  NodeId softplus(NodeId a);
  NodeId sum(NodeId a);
  NodeId mean(NodeId a);
  NodeId slice(NodeId a, std::size_t offset, std::size_t len);
  NodeId slice(NodeId a, std::size_t offset, std::vector<std::size_t> out_shape);
  NodeId concat(const std::vector<NodeId>& parts);
  NodeId reshape(NodeId a, std::vector<std::size_t> shape);
  NodeId clamp(NodeId a, double lo, double hi);
  NodeId minimum(NodeId a, NodeId b);

  NodeId neg(NodeId a) { return scale(a, -1.0); }
  NodeId square(NodeId a) { return mul(a, a); }
  NodeId dot(NodeId a, NodeId b) { return sum(mul(a, b)); }

 private:
  struct Node {
    Op op;
    Tensor value;
    NodeId a = kNoNode;
    NodeId b = kNoNode;
    double c0 = 0.0;
    double c1 = 0.0;
    std::size_t offset = 0;
    std::vector<NodeId> many;
  };

  NodeId push(Node node);
  void ensure_adjoints();
  void sweep(NodeId from);
  void accumulate(const Node& node, const Tensor& grad);
  void check_finite_gradients() const;

  NodeId unary(Op op, NodeId a);

  std::vector<Node> nodes_;
  std::vector<Tensor> adjoints_;
  std::vector<std::pair<std::string, NodeId>> params_;
};

}  // namespace mpcrrl::nn
