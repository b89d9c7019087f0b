#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "mpcrrl/common.hpp"

namespace mpcrrl::nn {

// Dense row-major tensor of doubles. Rank 0 (scalar), 1 (vector) and 2
// (matrix) cover everything this project needs.
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<std::size_t> shape)
      : shape_(std::move(shape)), values_(numel_of(shape_), 0.0) {}

  Tensor(std::vector<std::size_t> shape, std::vector<double> values)
      : shape_(std::move(shape)), values_(std::move(values)) {
    if (values_.size() != numel_of(shape_)) {
      throw DimensionError("Tensor: value count " + std::to_string(values_.size()) +
                           " does not match shape product " + std::to_string(numel_of(shape_)));
    }
  }

  static Tensor scalar(double x) { return Tensor({}, {x}); }
  static Tensor vector(std::vector<double> v) {
    const std::size_t n = v.size();
    return Tensor({n}, std::move(v));
  }
  static Tensor zeros(std::vector<std::size_t> shape) { return Tensor(std::move(shape)); }
  static Tensor zeros_like(const Tensor& other) { return Tensor(other.shape_); }

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t size() const { return values_.size(); }
  std::size_t rank() const { return shape_.size(); }

  std::size_t rows() const { return rank() == 2 ? shape_[0] : (rank() == 1 ? shape_[0] : 1); }
  std::size_t cols() const { return rank() == 2 ? shape_[1] : 1; }

  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  // Row-major element access for rank-2 tensors.
  double& at(std::size_t r, std::size_t c) { return values_[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return values_[r * cols() + c]; }

  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }

  double item() const {
    if (values_.size() != 1) throw DimensionError("Tensor::item: tensor is not scalar");
    return values_[0];
  }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  bool finite() const { return all_finite(values_); }

  bool operator==(const Tensor& other) const {
    return shape_ == other.shape_ && values_ == other.values_;
  }

  // Eigen views over the flat storage (row-major).
  using MatMap = Eigen::Map<
      const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
  using MutMatMap =
      Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
  using VecMap = Eigen::Map<const Eigen::VectorXd>;
  using MutVecMap = Eigen::Map<Eigen::VectorXd>;

  MatMap mat() const {
    return MatMap(values_.data(), static_cast<Eigen::Index>(rows()),
                  static_cast<Eigen::Index>(cols()));
  }
  MutMatMap mat() {
    return MutMatMap(values_.data(), static_cast<Eigen::Index>(rows()),
                     static_cast<Eigen::Index>(cols()));
  }
  VecMap vec() const {
    return VecMap(values_.data(), static_cast<Eigen::Index>(values_.size()));
  }
  MutVecMap vec() {
    return MutVecMap(values_.data(), static_cast<Eigen::Index>(values_.size()));
  }

  static std::size_t numel_of(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t s : shape) n *= s;
    return n;
  }

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> values_;
};

inline std::string shape_string(const std::vector<std::size_t>& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

// Named parameter collection. std::map keeps iteration lexicographic, which
// the checkpoint format and optimizer state rely on.
class ParamSet {
 public:
  ParamSet() = default;

  void add(const std::string& name, Tensor t) {
    if (tensors_.count(name)) throw ContractError("ParamSet: duplicate name " + name);
    tensors_.emplace(name, std::move(t));
  }

  bool has(const std::string& name) const { return tensors_.count(name) > 0; }

  const Tensor& get(const std::string& name) const& {
    auto it = tensors_.find(name);
    if (it == tensors_.end()) throw ContractError("ParamSet: missing tensor " + name);
    return it->second;
  }
  Tensor& get(const std::string& name) & {
    auto it = tensors_.find(name);
    if (it == tensors_.end()) throw ContractError("ParamSet: missing tensor " + name);
    return it->second;
  }
  // Forbid references into temporaries.
  const Tensor& get(const std::string& name) const&& = delete;

  std::size_t size() const { return tensors_.size(); }
  std::size_t total_scalars() const {
    std::size_t n = 0;
    for (const auto& [k, v] : tensors_) n += v.size();
    return n;
  }

  auto begin() const { return tensors_.begin(); }
  auto end() const { return tensors_.end(); }
  auto begin() { return tensors_.begin(); }
  auto end() { return tensors_.end(); }

  bool operator==(const ParamSet& other) const {
    if (tensors_.size() != other.tensors_.size()) return false;
    auto it = tensors_.begin();
    auto jt = other.tensors_.begin();
    for (; it != tensors_.end(); ++it, ++jt) {
      if (it->first != jt->first) return false;
      if (it->second.shape() != jt->second.shape()) return false;
      if (it->second.values() != jt->second.values()) return false;
    }
    return true;
  }

 private:
  std::map<std::string, Tensor> tensors_;
};

}  // namespace mpcrrl::nn
