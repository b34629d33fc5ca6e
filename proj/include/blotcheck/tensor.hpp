#ifndef BLOTCHECK_TENSOR_HPP
#define BLOTCHECK_TENSOR_HPP

#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "blotcheck/error.hpp"

namespace blotcheck {

using Index = Eigen::Index;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Dense n-d array, row-major, with the flat storage exposed as an Eigen vector.
template <typename Scalar>
class Tensor {
 public:
  using MatrixMap = Eigen::Map<RowMatrix<Scalar>>;
  using ConstMatrixMap = Eigen::Map<const RowMatrix<Scalar>>;

  Tensor() = default;

  explicit Tensor(std::vector<Index> shape, Scalar fill = Scalar(0)) : shape_(std::move(shape)) {
    values_ = Vector<Scalar>::Constant(checked_size(shape_), fill);
  }

  Tensor(std::vector<Index> shape, Vector<Scalar> values) : shape_(std::move(shape)), values_(std::move(values)) {
    if (checked_size(shape_) != values_.size()) {
      throw Error(ErrorCode::ShapeMismatch, "tensor data length does not match shape " + shape_string());
    }
  }

  const std::vector<Index>& shape() const { return shape_; }
  Index dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t rank() const { return shape_.size(); }
  Index size() const { return values_.size(); }

  Vector<Scalar>& values() { return values_; }
  const Vector<Scalar>& values() const { return values_; }
  Scalar* data() { return values_.data(); }
  const Scalar* data() const { return values_.data(); }

  Scalar& operator[](Index i) { return values_[i]; }
  Scalar operator[](Index i) const { return values_[i]; }

  /// Rank-3 (channel, row, column) access.
  Scalar& operator()(Index c, Index y, Index x) { return values_[(c * shape_[1] + y) * shape_[2] + x]; }
  Scalar operator()(Index c, Index y, Index x) const { return values_[(c * shape_[1] + y) * shape_[2] + x]; }

  /// The flat storage viewed as a row-major rows x cols matrix.
  MatrixMap matrix(Index rows, Index cols) {
    check_view(rows, cols);
    return MatrixMap(values_.data(), rows, cols);
  }
  ConstMatrixMap matrix(Index rows, Index cols) const {
    check_view(rows, cols);
    return ConstMatrixMap(values_.data(), rows, cols);
  }

  template <typename To>
  Tensor<To> cast() const {
    return Tensor<To>(shape_, values_.template cast<To>());
  }

  void set_zero() { values_.setZero(); }

  std::string shape_string() const {
    std::string s = "(";
    for (std::size_t i = 0; i < shape_.size(); ++i) {
      s += (i ? "," : "") + std::to_string(shape_[i]);
    }
    return s + ")";
  }

  /// Exact equality of shape and every stored value.
  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.values_.size() == b.values_.size() &&
           std::equal(a.values_.data(), a.values_.data() + a.values_.size(), b.values_.data());
  }

 private:
  static Index checked_size(const std::vector<Index>& shape) {
    if (shape.empty()) {
      throw Error(ErrorCode::ShapeMismatch, "tensor needs at least one dimension");
    }
    Index n = 1;
    for (Index d : shape) {
      if (d < 1) {
        throw Error(ErrorCode::ShapeMismatch, "tensor dimensions must be >= 1");
      }
      n *= d;
    }
    return n;
  }

  void check_view(Index rows, Index cols) const {
    if (rows * cols != values_.size()) {
      throw Error(ErrorCode::ShapeMismatch, "matrix view does not cover tensor " + shape_string());
    }
  }

  std::vector<Index> shape_;
  Vector<Scalar> values_;
};

}  // namespace blotcheck

#endif  // BLOTCHECK_TENSOR_HPP
