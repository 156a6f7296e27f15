#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace skelcap::nn {

// Thrown when operand shapes do not fit an operation.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Thrown when a forward or backward pass produces NaN or Inf.
class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Shape = std::vector<std::size_t>;

std::string shape_string(const Shape& shape);

// Dense row-major array. Most operations treat it as a matrix of
// shape[0] rows by the product of the remaining dims.
template <typename T>
class BasicTensor {
 public:
  BasicTensor() = default;
  explicit BasicTensor(Shape shape, T fill = T(0));
  BasicTensor(Shape shape, std::vector<T> data);

  static BasicTensor matrix(std::size_t rows, std::size_t cols, T fill = T(0)) {
    return BasicTensor(Shape{rows, cols}, fill);
  }
  static BasicTensor row(std::vector<T> values) {
    std::size_t n = values.size();
    return BasicTensor(Shape{1, n}, std::move(values));
  }

  const Shape& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }
  std::size_t rows() const { return shape_.empty() ? 0 : shape_[0]; }
  std::size_t cols() const { return rows() ? data_.size() / rows() : 0; }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::span<T> span() { return data_; }
  std::span<const T> span() const { return data_; }
  std::span<const T> row_span(std::size_t r) const { return {data_.data() + r * cols(), cols()}; }
  std::span<T> row_span(std::size_t r) { return {data_.data() + r * cols(), cols()}; }
  const std::vector<T>& values() const { return data_; }
  std::vector<T>& values() { return data_; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }
  T& operator()(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  const T& operator()(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

  void reshape(Shape shape);
  bool all_finite() const;

  template <typename U>
  BasicTensor<U> cast() const {
    std::vector<U> out(data_.begin(), data_.end());
    return BasicTensor<U>(shape_, std::move(out));
  }

  bool operator==(const BasicTensor&) const = default;

 private:
  Shape shape_;
  std::vector<T> data_;
};

using Tensor = BasicTensor<float>;

std::size_t shape_size(const Shape& shape);

// C = A * B for row-major A[m,k], B[k,n]; C is overwritten.
// C (m x n) = op(A) op(B), plus C when `accumulate`. op(A) is m x k; with
// trans_a, A is stored k x m. op(B) is k x n; with trans_b, B is stored n x k.
template <typename T>
void gemm(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n,
          bool accumulate = false, bool trans_a = false, bool trans_b = false);
template <>
void gemm<float>(const float*, const float*, float*, std::size_t, std::size_t, std::size_t, bool, bool, bool);
template <>
void gemm<double>(const double*, const double*, double*, std::size_t, std::size_t, std::size_t, bool, bool,
                  bool);

}  // namespace skelcap::nn
