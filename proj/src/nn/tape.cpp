#include "mpcrrl/nn/tape.hpp"

#include <cmath>

namespace mpcrrl::nn {

namespace {

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double stable_softplus(double x) {
  if (x > 30.0) return x;
  if (x < -30.0) return std::exp(x);
  return std::log1p(std::exp(x));
}

}  // namespace

NodeId Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return nodes_.size() - 1;
}

NodeId Tape::constant(Tensor value) {
  Node n;
  n.op = Op::Constant;
  n.value = std::move(value);
  return push(std::move(n));
}

NodeId Tape::param(const std::string& name, const Tensor& value) {
  Node n;
  n.op = Op::Param;
  n.value = value;
  NodeId id = push(std::move(n));
  params_.emplace_back(name, id);
  return id;
}

NodeId Tape::unary(Op op, NodeId a) {
  Node n;
  n.op = op;
  n.a = a;
  n.value = Tensor::zeros_like(nodes_[a].value);
  const auto& in = nodes_[a].value.values();
  auto& out = n.value.values();
  switch (op) {
    case Op::Tanh:
      for (std::size_t i = 0; i < in.size(); ++i) out[i] = std::tanh(in[i]);
      break;
    case Op::Sigmoid:
      for (std::size_t i = 0; i < in.size(); ++i) out[i] = stable_sigmoid(in[i]);
      break;
    case Op::Sin:
      for (std::size_t i = 0; i < in.size(); ++i) out[i] = std::sin(in[i]);
      break;
    case Op::Cos:
      for (std::size_t i = 0; i < in.size(); ++i) out[i] = std::cos(in[i]);
      break;
    case Op::Sqrt:
      for (std::size_t i = 0; i < in.size(); ++i) {
        if (in[i] < 0.0) throw DomainError("tape sqrt: negative input");
        out[i] = std::sqrt(in[i]);
      }
      break;
    case Op::Log:
      for (std::size_t i = 0; i < in.size(); ++i) {
        if (in[i] <= 0.0) throw DomainError("tape log: non-positive input");
        out[i] = std::log(in[i]);
      }
      break;
    case Op::Exp:
      for (std::size_t i = 0; i < in.size(); ++i) out[i] = std::exp(in[i]);
      break;
    case Op::Softplus:
      for (std::size_t i = 0; i < in.size(); ++i) out[i] = stable_softplus(in[i]);
      break;
    default:
      throw ContractError("tape: bad unary op");
  }
  return push(std::move(n));
}

NodeId Tape::add(NodeId a, NodeId b) {
  if (!nodes_[a].value.same_shape(nodes_[b].value))
    throw DimensionError("tape add: shape mismatch " + shape_string(nodes_[a].value.shape()) +
                         " vs " + shape_string(nodes_[b].value.shape()));
  Node n;
  n.op = Op::Add;
  n.a = a;
  n.b = b;
  n.value = nodes_[a].value;
  n.value.vec() += nodes_[b].value.vec();
  return push(std::move(n));
}

NodeId Tape::sub(NodeId a, NodeId b) {
  if (!nodes_[a].value.same_shape(nodes_[b].value))
    throw DimensionError("tape sub: shape mismatch");
  Node n;
  n.op = Op::Sub;
  n.a = a;
  n.b = b;
  n.value = nodes_[a].value;
  n.value.vec() -= nodes_[b].value.vec();
  return push(std::move(n));
}

NodeId Tape::mul(NodeId a, NodeId b) {
  if (!nodes_[a].value.same_shape(nodes_[b].value))
    throw DimensionError("tape mul: shape mismatch");
  Node n;
  n.op = Op::Mul;
  n.a = a;
  n.b = b;
  n.value = nodes_[a].value;
  n.value.vec().array() *= nodes_[b].value.vec().array();
  return push(std::move(n));
}

NodeId Tape::scale(NodeId a, double c) {
  Node n;
  n.op = Op::Scale;
  n.a = a;
  n.c0 = c;
  n.value = nodes_[a].value;
  n.value.vec() *= c;
  return push(std::move(n));
}

NodeId Tape::add_scalar(NodeId a, double c) {
  Node n;
  n.op = Op::AddScalar;
  n.a = a;
  n.c0 = c;
  n.value = nodes_[a].value;
  n.value.vec().array() += c;
  return push(std::move(n));
}

NodeId Tape::matmul(NodeId a, NodeId b) {
  const Tensor& A = nodes_[a].value;
  const Tensor& B = nodes_[b].value;
  if (A.rank() != 2) throw DimensionError("tape matmul: left operand must be rank 2");
  if (B.rank() == 1) {
    if (A.cols() != B.rows())
      throw DimensionError("tape matmul: inner dimensions " + std::to_string(A.cols()) + " vs " +
                           std::to_string(B.rows()));
    Node n;
    n.op = Op::MatMul;
    n.a = a;
    n.b = b;
    n.value = Tensor({A.rows()});
    n.value.vec() = A.mat() * B.vec();
    return push(std::move(n));
  }
  if (B.rank() == 2) {
    if (A.cols() != B.rows()) throw DimensionError("tape matmul: inner dimensions");
    Node n;
    n.op = Op::MatMul;
    n.a = a;
    n.b = b;
    n.value = Tensor({A.rows(), B.cols()});
    n.value.mat() = A.mat() * B.mat();
    return push(std::move(n));
  }
  throw DimensionError("tape matmul: right operand must be rank 1 or 2");
}

NodeId Tape::col_add_vec(NodeId m, NodeId v) {
  const Tensor& M = nodes_[m].value;
  const Tensor& V = nodes_[v].value;
  if (M.rank() != 2 || V.rank() != 1 || M.rows() != V.rows())
    throw DimensionError("tape col_add_vec: need [m,k] and [m]");
  Node n;
  n.op = Op::ColAddVec;
  n.a = m;
  n.b = v;
  n.value = M;
  n.value.mat().colwise() += V.vec();
  return push(std::move(n));
}

NodeId Tape::tanh_(NodeId a) { return unary(Op::Tanh, a); }
NodeId Tape::sigmoid(NodeId a) { return unary(Op::Sigmoid, a); }
NodeId Tape::sin_(NodeId a) { return unary(Op::Sin, a); }
NodeId Tape::cos_(NodeId a) { return unary(Op::Cos, a); }
NodeId Tape::sqrt_(NodeId a) { return unary(Op::Sqrt, a); }
NodeId Tape::log_(NodeId a) { return unary(Op::Log, a); }
NodeId Tape::exp_(NodeId a) { return unary(Op::Exp, a); }
NodeId Tape::softplus(NodeId a) { return unary(Op::Softplus, a); }

NodeId Tape::sum(NodeId a) {
  Node n;
  n.op = Op::Sum;
  n.a = a;
  n.value = Tensor::scalar(nodes_[a].value.vec().sum());
  return push(std::move(n));
}

NodeId Tape::mean(NodeId a) {
  const std::size_t n = nodes_[a].value.size();
  if (n == 0) throw DimensionError("tape mean: empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(n));
}

NodeId Tape::slice(NodeId a, std::size_t offset, std::size_t len) {
  return slice(a, offset, std::vector<std::size_t>{len});
}

NodeId Tape::slice(NodeId a, std::size_t offset, std::vector<std::size_t> out_shape) {
  const std::size_t len = Tensor::numel_of(out_shape);
  const Tensor& in = nodes_[a].value;
  if (offset + len > in.size()) throw DimensionError("tape slice: range out of bounds");
  Node n;
  n.op = Op::Slice;
  n.a = a;
  n.offset = offset;
  std::vector<double> vals(in.values().begin() + static_cast<std::ptrdiff_t>(offset),
                           in.values().begin() + static_cast<std::ptrdiff_t>(offset + len));
  n.value = Tensor(std::move(out_shape), std::move(vals));
  return push(std::move(n));
}

NodeId Tape::concat(const std::vector<NodeId>& parts) {
  if (parts.empty()) throw ContractError("tape concat: no inputs");
  std::size_t total = 0;
  for (NodeId p : parts) total += nodes_[p].value.size();
  Node n;
  n.op = Op::Concat;
  n.many = parts;
  n.value = Tensor({total});
  std::size_t k = 0;
  for (NodeId p : parts)
    for (double x : nodes_[p].value.values()) n.value[k++] = x;
  return push(std::move(n));
}

NodeId Tape::reshape(NodeId a, std::vector<std::size_t> shape) {
  const Tensor& in = nodes_[a].value;
  if (Tensor::numel_of(shape) != in.size()) throw DimensionError("tape reshape: size mismatch");
  Node n;
  n.op = Op::Reshape;
  n.a = a;
  n.value = Tensor(std::move(shape), in.values());
  return push(std::move(n));
}

NodeId Tape::clamp(NodeId a, double lo, double hi) {
  Node n;
  n.op = Op::Clamp;
  n.a = a;
  n.c0 = lo;
  n.c1 = hi;
  n.value = nodes_[a].value;
  for (double& x : n.value.values()) x = std::min(std::max(x, lo), hi);
  return push(std::move(n));
}

NodeId Tape::minimum(NodeId a, NodeId b) {
  if (!nodes_[a].value.same_shape(nodes_[b].value))
    throw DimensionError("tape minimum: shape mismatch");
  Node n;
  n.op = Op::Minimum;
  n.a = a;
  n.b = b;
  n.value = nodes_[a].value;
  const auto& bb = nodes_[b].value.values();
  auto& out = n.value.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::min(out[i], bb[i]);
  return push(std::move(n));
}

void Tape::ensure_adjoints() {
  adjoints_.resize(nodes_.size());
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (adjoints_[i].size() != nodes_[i].value.size() ||
        adjoints_[i].shape() != nodes_[i].value.shape()) {
      adjoints_[i] = Tensor::zeros_like(nodes_[i].value);
    } else {
      adjoints_[i].vec().setZero();
    }
  }
}

void Tape::backward(NodeId loss) {
  if (nodes_[loss].value.size() != 1)
    throw ContractError("tape backward: loss node is not scalar");
  if (!std::isfinite(nodes_[loss].value.item()))
    throw NumericError("tape backward: loss is not finite at node " + std::to_string(loss));
  backward_seed(loss, Tensor::scalar(1.0));
}

void Tape::backward_seed(NodeId node, const Tensor& seed) {
  if (!seed.same_shape(nodes_[node].value))
    throw DimensionError("tape backward_seed: seed shape mismatch");
  ensure_adjoints();
  adjoints_[node] = seed;
  sweep(node);
}

void Tape::sweep(NodeId from) {
  for (std::size_t i = from + 1; i-- > 0;) {
    const Node& n = nodes_[i];
    if (n.op == Op::Constant || n.op == Op::Param) continue;
    const Tensor& g = adjoints_[i];
    accumulate(n, g);
  }
}

void Tape::accumulate(const Node& n, const Tensor& g) {
  auto& adj = adjoints_;
  switch (n.op) {
    case Op::Add:
      adj[n.a].vec() += g.vec();
      adj[n.b].vec() += g.vec();
      break;
    case Op::Sub:
      adj[n.a].vec() += g.vec();
      adj[n.b].vec() -= g.vec();
      break;
    case Op::Mul:
      adj[n.a].vec().array() += g.vec().array() * nodes_[n.b].value.vec().array();
      adj[n.b].vec().array() += g.vec().array() * nodes_[n.a].value.vec().array();
      break;
    case Op::Scale:
      adj[n.a].vec() += n.c0 * g.vec();
      break;
    case Op::AddScalar:
      adj[n.a].vec() += g.vec();
      break;
    case Op::MatMul: {
      const Tensor& A = nodes_[n.a].value;
      const Tensor& B = nodes_[n.b].value;
      if (B.rank() == 1) {
        adj[n.a].mat() += g.vec() * B.vec().transpose();
        adj[n.b].vec() += A.mat().transpose() * g.vec();
      } else {
        adj[n.a].mat() += g.mat() * B.mat().transpose();
        adj[n.b].mat() += A.mat().transpose() * g.mat();
      }
      break;
    }
    case Op::ColAddVec:
      adj[n.a].vec() += g.vec();
      adj[n.b].vec() += g.mat().rowwise().sum();
      break;
    case Op::Tanh:
      adj[n.a].vec().array() +=
          g.vec().array() * (1.0 - n.value.vec().array() * n.value.vec().array());
      break;
    case Op::Sigmoid:
      adj[n.a].vec().array() +=
          g.vec().array() * n.value.vec().array() * (1.0 - n.value.vec().array());
      break;
    case Op::Sin:
      adj[n.a].vec().array() += g.vec().array() * nodes_[n.a].value.vec().array().cos();
      break;
    case Op::Cos:
      adj[n.a].vec().array() -= g.vec().array() * nodes_[n.a].value.vec().array().sin();
      break;
    case Op::Sqrt:
      adj[n.a].vec().array() += g.vec().array() / (2.0 * n.value.vec().array());
      break;
    case Op::Log:
      adj[n.a].vec().array() += g.vec().array() / nodes_[n.a].value.vec().array();
      break;
    case Op::Exp:
      adj[n.a].vec().array() += g.vec().array() * n.value.vec().array();
      break;
    case Op::Softplus:
      for (std::size_t i = 0; i < g.size(); ++i)
        adj[n.a][i] += g[i] * stable_sigmoid(nodes_[n.a].value[i]);
      break;
    case Op::Sum:
      adj[n.a].vec().array() += g.item();
      break;
    case Op::Slice:
      for (std::size_t i = 0; i < n.value.size(); ++i) adj[n.a][n.offset + i] += g[i];
      break;
    case Op::Concat: {
      std::size_t k = 0;
      for (NodeId p : n.many) {
        Tensor& dst = adj[p];
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += g[k++];
      }
      break;
    }
    case Op::Reshape:
      adj[n.a].vec() += g.vec();
      break;
    case Op::Clamp:
      for (std::size_t i = 0; i < g.size(); ++i) {
        const double x = nodes_[n.a].value[i];
        if (x > n.c0 && x < n.c1) adj[n.a][i] += g[i];
      }
      break;
    case Op::Minimum:
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (nodes_[n.a].value[i] <= nodes_[n.b].value[i])
          adj[n.a][i] += g[i];
        else
          adj[n.b][i] += g[i];
      }
      break;
    case Op::Constant:
    case Op::Param:
      break;
  }
}

const Tensor& Tape::adjoint(NodeId id) const {
  if (id >= adjoints_.size())
    throw ContractError("tape adjoint: no backward pass has reached node " + std::to_string(id));
  return adjoints_[id];
}

ParamSet Tape::param_gradients() const {
  ParamSet grads;
  for (const auto& [name, id] : params_) {
    Tensor g = id < adjoints_.size() && adjoints_[id].size() == nodes_[id].value.size()
                   ? adjoints_[id]
                   : Tensor::zeros_like(nodes_[id].value);
    if (!g.finite()) {
      check_finite_gradients();
    }
    grads.add(name, std::move(g));
  }
  return grads;
}

void Tape::check_finite_gradients() const {
  // Walk forward to locate the first node whose adjoint went non-finite,
  // so the error names where the NaN entered the graph.
  for (std::size_t i = 0; i < adjoints_.size(); ++i) {
    if (adjoints_[i].size() > 0 && !adjoints_[i].finite())
      throw NumericError("tape backward: non-finite adjoint at node " + std::to_string(i));
  }
}

}  // namespace mpcrrl::nn
