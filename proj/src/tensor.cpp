#include "lidarfcn/tensor.hpp"

#include <Eigen/Core>

#include <cmath>
#include <sstream>

namespace lfcn {

template <typename T>
bool Tensor<T>::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](T v) { return std::isfinite(v); });
}

std::string shape_string(const std::vector<std::size_t>& shape) {
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? ", " : "") << shape[i];
  os << ")";
  return os.str();
}

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Unfolds `x` (C, H, W) into (C*kh*kw, Ho*Wo) patches of the convolution geometry.
template <typename T>
void im2col(const T* x, int channels, int h, int w, const Conv2dGeometry& g, int ho, int wo,
            T* col) {
  for (int c = 0; c < channels; ++c) {
    const T* plane = x + std::size_t(c) * h * w;
    for (int u = 0; u < g.kernel_rows; ++u) {
      for (int v = 0; v < g.kernel_cols; ++v) {
        T* out = col + ((std::size_t(c) * g.kernel_rows + u) * g.kernel_cols + v) * ho * wo;
        for (int i = 0; i < ho; ++i) {
          const int ii = i * g.stride_rows + u - g.pad_rows;
          T* orow = out + std::size_t(i) * wo;
          if (ii < 0 || ii >= h) {
            std::fill(orow, orow + wo, T(0));
            continue;
          }
          const T* irow = plane + std::size_t(ii) * w;
          for (int j = 0; j < wo; ++j) {
            const int jj = j * g.stride_cols + v - g.pad_cols;
            orow[j] = (jj >= 0 && jj < w) ? irow[jj] : T(0);
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatters patches back and accumulates into `x`.
template <typename T>
void col2im(const T* col, int channels, int h, int w, const Conv2dGeometry& g, int ho, int wo,
            T* x) {
  std::fill(x, x + std::size_t(channels) * h * w, T(0));
  for (int c = 0; c < channels; ++c) {
    T* plane = x + std::size_t(c) * h * w;
    for (int u = 0; u < g.kernel_rows; ++u) {
      for (int v = 0; v < g.kernel_cols; ++v) {
        const T* in = col + ((std::size_t(c) * g.kernel_rows + u) * g.kernel_cols + v) * ho * wo;
        for (int i = 0; i < ho; ++i) {
          const int ii = i * g.stride_rows + u - g.pad_rows;
          if (ii < 0 || ii >= h) continue;
          T* orow = plane + std::size_t(ii) * w;
          const T* irow = in + std::size_t(i) * wo;
          for (int j = 0; j < wo; ++j) {
            const int jj = j * g.stride_cols + v - g.pad_cols;
            if (jj >= 0 && jj < w) orow[jj] += irow[j];
          }
        }
      }
    }
  }
}

void check_geometry(const Conv2dGeometry& g, const std::string& name) {
  if (g.kernel_rows < 1 || g.kernel_cols < 1 || g.stride_rows < 1 || g.stride_cols < 1 ||
      g.pad_rows < 0 || g.pad_cols < 0) {
    throw ConfigError(name + ": invalid kernel/stride/padding");
  }
}

template <typename T>
void check_map(const Tensor<T>& x, const std::string& name) {
  if (x.ndim() != 3) throw ConfigError(name + ": expected a 3-d input, got " + shape_string(x.shape()));
}

template <typename T>
void add_bias(Tensor<T>& y, const Tensor<T>& b) {
  for (std::size_t o = 0; o < y.channels(); ++o) {
    auto plane = y.channel(o);
    const T bias = b[o];
    for (auto& v : plane) v += bias;
  }
}

template <typename T>
Tensor<T> bias_grad(const Tensor<T>& dy) {
  Tensor<T> db({dy.channels()});
  for (std::size_t o = 0; o < dy.channels(); ++o) {
    T s = 0;
    for (T v : dy.channel(o)) s += v;
    db[o] = s;
  }
  return db;
}

}  // namespace

template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b,
                         const Conv2dGeometry& g, const std::string& name) {
  check_geometry(g, name);
  check_map(x, name);
  if (w.ndim() != 4 || w.dim(1) != x.channels() || w.dim(2) != std::size_t(g.kernel_rows) ||
      w.dim(3) != std::size_t(g.kernel_cols)) {
    throw ConfigError(name + ": kernel " + shape_string(w.shape()) + " incompatible with input " +
                      shape_string(x.shape()));
  }
  if (b.size() != w.dim(0)) throw ConfigError(name + ": bias size mismatch");
  const int h = int(x.rows());
  const int wd = int(x.cols());
  const int ho = g.conv_rows(h);
  const int wo = g.conv_cols(wd);
  if (ho < 1 || wo < 1) throw ConfigError(name + ": input " + shape_string(x.shape()) + " too small");
  const int outc = int(w.dim(0));
  const int ck = int(x.channels()) * g.kernel_rows * g.kernel_cols;
  const int p = ho * wo;

  std::vector<T> col(std::size_t(ck) * p);
  im2col(x.data(), int(x.channels()), h, wd, g, ho, wo, col.data());
  Tensor<T> y({std::size_t(outc), std::size_t(ho), std::size_t(wo)});
  Eigen::Map<const RowMat<T>> wm(w.data(), outc, ck);
  Eigen::Map<const RowMat<T>> cm(col.data(), ck, p);
  Eigen::Map<RowMat<T>> ym(y.data(), outc, p);
  ym.noalias() = wm * cm;
  add_bias(y, b);
  return y;
}

template <typename T>
ConvGrads<T> conv2d_backward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& dy,
                             const Conv2dGeometry& g) {
  const int h = int(x.rows());
  const int wd = int(x.cols());
  const int ho = int(dy.rows());
  const int wo = int(dy.cols());
  const int outc = int(w.dim(0));
  const int ck = int(x.channels()) * g.kernel_rows * g.kernel_cols;
  const int p = ho * wo;

  std::vector<T> col(std::size_t(ck) * p);
  im2col(x.data(), int(x.channels()), h, wd, g, ho, wo, col.data());
  Eigen::Map<const RowMat<T>> wm(w.data(), outc, ck);
  Eigen::Map<const RowMat<T>> cm(col.data(), ck, p);
  Eigen::Map<const RowMat<T>> dym(dy.data(), outc, p);

  ConvGrads<T> grads;
  grads.dw = Tensor<T>(w.shape());
  Eigen::Map<RowMat<T>> dwm(grads.dw.data(), outc, ck);
  dwm.noalias() = dym * cm.transpose();
  grads.db = bias_grad(dy);

  std::vector<T> dcol(std::size_t(ck) * p);
  Eigen::Map<RowMat<T>> dcm(dcol.data(), ck, p);
  dcm.noalias() = wm.transpose() * dym;
  grads.dx = Tensor<T>(x.shape());
  col2im(dcol.data(), int(x.channels()), h, wd, g, ho, wo, grads.dx.data());
  return grads;
}

template <typename T>
Tensor<T> deconv2d_forward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b,
                           const Conv2dGeometry& g, const std::string& name) {
  check_geometry(g, name);
  check_map(x, name);
  if (g.kernel_rows < g.stride_rows || g.kernel_cols < g.stride_cols) {
    throw ConfigError(name + ": deconvolution kernel must be at least as large as its stride");
  }
  if (w.ndim() != 4 || w.dim(0) != x.channels() || w.dim(2) != std::size_t(g.kernel_rows) ||
      w.dim(3) != std::size_t(g.kernel_cols)) {
    throw ConfigError(name + ": kernel " + shape_string(w.shape()) + " incompatible with input " +
                      shape_string(x.shape()));
  }
  if (b.size() != w.dim(1)) throw ConfigError(name + ": bias size mismatch");
  const int inc = int(x.channels());
  const int outc = int(w.dim(1));
  const int ho = g.deconv_rows(int(x.rows()));
  const int wo = g.deconv_cols(int(x.cols()));
  if (ho < 1 || wo < 1) throw ConfigError(name + ": output would be empty");
  const int ck = outc * g.kernel_rows * g.kernel_cols;
  const int p = int(x.rows() * x.cols());

  std::vector<T> col(std::size_t(ck) * p);
  Eigen::Map<const RowMat<T>> wm(w.data(), inc, ck);
  Eigen::Map<const RowMat<T>> xm(x.data(), inc, p);
  Eigen::Map<RowMat<T>> cm(col.data(), ck, p);
  cm.noalias() = wm.transpose() * xm;
  Tensor<T> y({std::size_t(outc), std::size_t(ho), std::size_t(wo)});
  col2im(col.data(), outc, ho, wo, g, int(x.rows()), int(x.cols()), y.data());
  add_bias(y, b);
  return y;
}

template <typename T>
ConvGrads<T> deconv2d_backward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& dy,
                               const Conv2dGeometry& g) {
  const int inc = int(x.channels());
  const int outc = int(w.dim(1));
  const int ck = outc * g.kernel_rows * g.kernel_cols;
  const int p = int(x.rows() * x.cols());

  std::vector<T> dcol(std::size_t(ck) * p);
  im2col(dy.data(), outc, int(dy.rows()), int(dy.cols()), g, int(x.rows()), int(x.cols()),
         dcol.data());
  Eigen::Map<const RowMat<T>> wm(w.data(), inc, ck);
  Eigen::Map<const RowMat<T>> xm(x.data(), inc, p);
  Eigen::Map<const RowMat<T>> dcm(dcol.data(), ck, p);

  ConvGrads<T> grads;
  grads.dx = Tensor<T>(x.shape());
  Eigen::Map<RowMat<T>> dxm(grads.dx.data(), inc, p);
  dxm.noalias() = wm * dcm;
  grads.dw = Tensor<T>(w.shape());
  Eigen::Map<RowMat<T>> dwm(grads.dw.data(), inc, ck);
  dwm.noalias() = xm * dcm.transpose();
  grads.db = bias_grad(dy);
  return grads;
}

template <typename T>
Tensor<T> relu_forward(const Tensor<T>& x) {
  Tensor<T> y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
  return y;
}

template <typename T>
Tensor<T> relu_backward(const Tensor<T>& x, const Tensor<T>& dy) {
  Tensor<T> dx(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) dx[i] = x[i] > T(0) ? dy[i] : T(0);
  return dx;
}

template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b, const std::string& name) {
  check_map(a, name);
  check_map(b, name);
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ConfigError(name + ": cannot concatenate " + shape_string(a.shape()) + " and " +
                      shape_string(b.shape()));
  }
  Tensor<T> y({a.channels() + b.channels(), a.rows(), a.cols()});
  std::copy(a.storage().begin(), a.storage().end(), y.data());
  std::copy(b.storage().begin(), b.storage().end(), y.data() + a.size());
  return y;
}

template <typename T>
Tensor<T> softmax2_forward(const Tensor<T>& x) {
  if (x.ndim() != 3 || x.channels() != 2) {
    throw ConfigError("softmax2: expected 2 channels, got " + shape_string(x.shape()));
  }
  Tensor<T> y(x.shape());
  const std::size_t n = x.rows() * x.cols();
  for (std::size_t i = 0; i < n; ++i) {
    const T a = x[i];
    const T b = x[n + i];
    const T m = std::max(a, b);
    const T ea = std::exp(a - m);
    const T eb = std::exp(b - m);
    y[i] = ea / (ea + eb);
    y[n + i] = eb / (ea + eb);
  }
  return y;
}

template <typename T>
Tensor<T> softmax2_backward(const Tensor<T>& y, const Tensor<T>& dy) {
  Tensor<T> dx(y.shape());
  const std::size_t n = y.rows() * y.cols();
  for (std::size_t i = 0; i < n; ++i) {
    const T s = y[i] * dy[i] + y[n + i] * dy[n + i];
    dx[i] = y[i] * (dy[i] - s);
    dx[n + i] = y[n + i] * (dy[n + i] - s);
  }
  return dx;
}

template <typename T>
T dot(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.size() != b.size()) throw ConfigError("dot: size mismatch");
  T s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

#define LFCN_INSTANTIATE_TENSOR(T)                                                              \
  template class Tensor<T>;                                                                    \
  template Tensor<T> conv2d_forward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,       \
                                    const Conv2dGeometry&, const std::string&);                \
  template ConvGrads<T> conv2d_backward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,   \
                                        const Conv2dGeometry&);                                \
  template Tensor<T> deconv2d_forward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,     \
                                      const Conv2dGeometry&, const std::string&);              \
  template ConvGrads<T> deconv2d_backward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, \
                                          const Conv2dGeometry&);                              \
  template Tensor<T> relu_forward(const Tensor<T>&);                                           \
  template Tensor<T> relu_backward(const Tensor<T>&, const Tensor<T>&);                        \
  template Tensor<T> concat_channels(const Tensor<T>&, const Tensor<T>&, const std::string&);  \
  template Tensor<T> softmax2_forward(const Tensor<T>&);                                       \
  template Tensor<T> softmax2_backward(const Tensor<T>&, const Tensor<T>&);                    \
  template T dot(const Tensor<T>&, const Tensor<T>&);

LFCN_INSTANTIATE_TENSOR(float)
LFCN_INSTANTIATE_TENSOR(double)

#undef LFCN_INSTANTIATE_TENSOR

}  // namespace lfcn
