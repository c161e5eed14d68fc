#pragma once

#include "lidarfcn/common.hpp"

#include <algorithm>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace lfcn {

/// Dense row-major n-d array. Feature maps are (channels, rows, cols);
/// convolution kernels are 4-d.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape, T fill = T(0))
      : shape_(std::move(shape)), data_(count(shape_), fill) {}
  Tensor(std::initializer_list<std::size_t> shape, T fill = T(0))
      : Tensor(std::vector<std::size_t>(shape), fill) {}

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t ndim() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  // (channels, rows, cols) accessors for 3-d feature maps.
  std::size_t channels() const { return shape_.at(0); }
  std::size_t rows() const { return shape_.at(1); }
  std::size_t cols() const { return shape_.at(2); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }
  std::vector<T>& storage() { return data_; }
  const std::vector<T>& storage() const { return data_; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }
  T& at(std::size_t c, std::size_t r, std::size_t k) {
    return data_[(c * shape_[1] + r) * shape_[2] + k];
  }
  const T& at(std::size_t c, std::size_t r, std::size_t k) const {
    return data_[(c * shape_[1] + r) * shape_[2] + k];
  }
  /// Contiguous plane of channel `c` of a 3-d tensor.
  std::span<T> channel(std::size_t c) {
    const std::size_t n = shape_[1] * shape_[2];
    return {data_.data() + c * n, n};
  }
  std::span<const T> channel(std::size_t c) const {
    const std::size_t n = shape_[1] * shape_[2];
    return {data_.data() + c * n, n};
  }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }
  bool all_finite() const;

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out(shape_);
    std::transform(data_.begin(), data_.end(), out.data(), [](T v) { return static_cast<U>(v); });
    return out;
  }

  static std::size_t count(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return shape.empty() ? 0 : n;
  }

 private:
  std::vector<std::size_t> shape_;
  std::vector<T> data_;
};

std::string shape_string(const std::vector<std::size_t>& shape);

struct Conv2dGeometry {
  int kernel_rows = 1;
  int kernel_cols = 1;
  int stride_rows = 1;
  int stride_cols = 1;
  int pad_rows = 0;
  int pad_cols = 0;

  /// floor((in + 2p - k) / s) + 1
  int conv_rows(int in) const { return (in + 2 * pad_rows - kernel_rows) / stride_rows + 1; }
  int conv_cols(int in) const { return (in + 2 * pad_cols - kernel_cols) / stride_cols + 1; }
  /// (in - 1) * s - 2p + k
  int deconv_rows(int in) const { return (in - 1) * stride_rows - 2 * pad_rows + kernel_rows; }
  int deconv_cols(int in) const { return (in - 1) * stride_cols - 2 * pad_cols + kernel_cols; }
};

// Cross-correlation: y[o,i,j] = b[o] + sum x[c, i*sv+u-ph, j*sh+v-pw] * w[o,c,u,v],
// with w of shape (out, in, kh, kw) and zeros outside the input.
template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b,
                         const Conv2dGeometry& g, const std::string& name = "conv");

template <typename T>
struct ConvGrads {
  Tensor<T> dx;
  Tensor<T> dw;
  Tensor<T> db;
};

template <typename T>
ConvGrads<T> conv2d_backward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& dy,
                             const Conv2dGeometry& g);

// Transposed convolution: the adjoint of conv2d_forward for a kernel of shape
// (in, out, kh, kw), plus bias. Output size is (in - 1) * s - 2p + k per axis.
template <typename T>
Tensor<T> deconv2d_forward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b,
                           const Conv2dGeometry& g, const std::string& name = "deconv");

template <typename T>
ConvGrads<T> deconv2d_backward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& dy,
                               const Conv2dGeometry& g);

template <typename T>
Tensor<T> relu_forward(const Tensor<T>& x);
template <typename T>
Tensor<T> relu_backward(const Tensor<T>& x, const Tensor<T>& dy);

template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b, const std::string& name = "concat");

/// Two-channel softmax per cell.
template <typename T>
Tensor<T> softmax2_forward(const Tensor<T>& x);
template <typename T>
Tensor<T> softmax2_backward(const Tensor<T>& y, const Tensor<T>& dy);

template <typename T>
T dot(const Tensor<T>& a, const Tensor<T>& b);

}  // namespace lfcn
