#include "skelcap/tensor.hpp"

#include <cmath>
#include <cstring>

#include <cblas.h>

namespace skelcap::nn {

std::string shape_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

template <typename T>
BasicTensor<T>::BasicTensor(Shape shape, T fill)
    : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}

template <typename T>
BasicTensor<T>::BasicTensor(Shape shape, std::vector<T> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (data_.size() != shape_size(shape_))
    throw ShapeError("tensor data has " + std::to_string(data_.size()) + " values but shape " +
                     shape_string(shape_) + " needs " + std::to_string(shape_size(shape_)));
}

template <typename T>
void BasicTensor<T>::reshape(Shape shape) {
  if (shape_size(shape) != data_.size())
    throw ShapeError("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
  shape_ = std::move(shape);
}

template <typename T>
bool BasicTensor<T>::all_finite() const {
  // v * 0 is NaN exactly when v is infinite or NaN.
  T acc[4] = {0, 0, 0, 0};
  const std::size_t n = data_.size();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    for (std::size_t k = 0; k < 4; ++k) acc[k] += data_[i + k] * T(0);
  for (; i < n; ++i) acc[0] += data_[i] * T(0);
  return acc[0] + acc[1] + acc[2] + acc[3] == T(0);
}

namespace {

void init_blas() {
  static const bool once = [] {
    openblas_set_num_threads(1);
    return true;
  }();
  (void)once;
}

}  // namespace

template <>
void gemm<float>(const float* a, const float* b, float* c, std::size_t m, std::size_t k, std::size_t n,
                 bool accumulate, bool trans_a, bool trans_b) {
  if (m == 0 || n == 0) return;
  if (k == 0) {
    if (!accumulate) std::memset(c, 0, sizeof(float) * m * n);
    return;
  }
  init_blas();
  cblas_sgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans, trans_b ? CblasTrans : CblasNoTrans,
              static_cast<int>(m), static_cast<int>(n), static_cast<int>(k), 1.0f, a,
              static_cast<int>(trans_a ? m : k), b, static_cast<int>(trans_b ? k : n), accumulate ? 1.0f : 0.0f,
              c, static_cast<int>(n));
}

template <>
void gemm<double>(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n,
                  bool accumulate, bool trans_a, bool trans_b) {
  if (m == 0 || n == 0) return;
  if (k == 0) {
    if (!accumulate) std::memset(c, 0, sizeof(double) * m * n);
    return;
  }
  init_blas();
  cblas_dgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans, trans_b ? CblasTrans : CblasNoTrans,
              static_cast<int>(m), static_cast<int>(n), static_cast<int>(k), 1.0, a,
              static_cast<int>(trans_a ? m : k), b, static_cast<int>(trans_b ? k : n), accumulate ? 1.0 : 0.0, c,
              static_cast<int>(n));
}

template class BasicTensor<float>;
template class BasicTensor<double>;

}  // namespace skelcap::nn
