#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

#include "tt/errors.hpp"

namespace tt {

using Index = Eigen::Index;
using ArrayX = Eigen::ArrayXd;
using MatrixRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<MatrixRM>;
using ConstMatMap = Eigen::Map<const MatrixRM>;
using VecMap = Eigen::Map<Eigen::VectorXd>;
using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;

std::string shape_string(const std::vector<Index>& shape);

// Dense row-major tensor of 64-bit reals. The shape is metadata over a flat
// Eigen array; matrix views are created on demand via Eigen::Map so all heavy
// arithmetic runs through Eigen kernels.
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<Index> shape) : shape_(std::move(shape)) {
    data_ = ArrayX::Zero(checked_size(shape_));
  }

  Tensor(std::vector<Index> shape, double fill) : shape_(std::move(shape)) {
    data_ = ArrayX::Constant(checked_size(shape_), fill);
  }

  Tensor(std::vector<Index> shape, std::initializer_list<double> values)
      : Tensor(std::move(shape), std::vector<double>(values)) {}

  Tensor(std::vector<Index> shape, const std::vector<double>& values) : shape_(std::move(shape)) {
    const Index n = checked_size(shape_);
    if (n != static_cast<Index>(values.size()))
      throw ShapeError("tensor init: shape " + shape_string(shape_) + " expects " +
                       std::to_string(n) + " values, got " + std::to_string(values.size()));
    data_ = Eigen::Map<const ArrayX>(values.data(), n);
  }

  static Tensor scalar(double v) { return Tensor({1}, {v}); }

  const std::vector<Index>& shape() const { return shape_; }
  Index rank() const { return static_cast<Index>(shape_.size()); }
  Index dim(Index axis) const { return shape_.at(static_cast<size_t>(axis)); }
  Index size() const { return data_.size(); }
  bool empty() const { return data_.size() == 0; }
  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  double& operator[](Index i) { return data_[i]; }
  double operator[](Index i) const { return data_[i]; }

  ArrayX& array() { return data_; }
  const ArrayX& array() const { return data_; }

  // View with the last axis as columns and everything else collapsed to rows.
  MatMap rows_by_last() {
    const Index cols = shape_.empty() ? 1 : shape_.back();
    return MatMap(data_.data(), cols == 0 ? 0 : size() / cols, cols);
  }
  ConstMatMap rows_by_last() const {
    const Index cols = shape_.empty() ? 1 : shape_.back();
    return ConstMatMap(data_.data(), cols == 0 ? 0 : size() / cols, cols);
  }

  MatMap as_matrix(Index rows, Index cols) {
    if (rows * cols != size())
      throw ShapeError("as_matrix: " + std::to_string(rows) + "x" + std::to_string(cols) +
                       " view does not cover " + std::to_string(size()) + " entries");
    return MatMap(data_.data(), rows, cols);
  }
  ConstMatMap as_matrix(Index rows, Index cols) const {
    if (rows * cols != size())
      throw ShapeError("as_matrix: " + std::to_string(rows) + "x" + std::to_string(cols) +
                       " view does not cover " + std::to_string(size()) + " entries");
    return ConstMatMap(data_.data(), rows, cols);
  }

  bool all_finite() const { return data_.isFinite().all(); }

  void set_zero() { data_.setZero(); }

 private:
  static Index checked_size(const std::vector<Index>& shape) {
    Index n = 1;
    for (Index d : shape) {
      if (d < 0) throw ShapeError("tensor shape has negative dimension: " + shape_string(shape));
      n *= d;
    }
    return n;
  }

  std::vector<Index> shape_;
  ArrayX data_;
};

inline std::string shape_string(const std::vector<Index>& shape) {
  std::string s = "(";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + ")";
}

inline Index numel(const std::vector<Index>& shape) {
  Index n = 1;
  for (Index d : shape) n *= d;
  return n;
}

}  // namespace tt
