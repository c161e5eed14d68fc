#pragma once

#include "lidarfcn/tensor.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace lfcn {

enum class LayerKind { Conv, Deconv, Relu, Concat, Softmax2 };

std::string to_string(LayerKind kind);

struct LayerSpec {
  std::string name;
  LayerKind kind = LayerKind::Conv;
  std::vector<std::string> inputs;  // node names; "input" is the point map
  int in_channels = 0;
  int out_channels = 0;
  Conv2dGeometry geometry;

  bool has_params() const { return kind == LayerKind::Conv || kind == LayerKind::Deconv; }
  /// (out, in, kh, kw) for conv, (in, out, kh, kw) for deconv.
  std::vector<std::size_t> kernel_shape() const;
};

struct FeatureShape {
  std::size_t channels = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;
  bool operator==(const FeatureShape&) const = default;
};

/// Channel widths and kernels of the two-branch encoder/decoder.
struct FcnOptions {
  int input_channels = 2;
  int conv1_channels = 16;
  int conv2_channels = 32;
  int conv3_channels = 64;
  int deconv4_channels = 32;
  int deconv5_channels = 16;
  int objectness_channels = 2;
  int box_channels = 24;
  Conv2dGeometry conv1{5, 9, 2, 4, 2, 4};
  Conv2dGeometry conv23{3, 3, 2, 2, 1, 1};
  Conv2dGeometry deconv45{4, 4, 2, 2, 1, 1};
  Conv2dGeometry deconv6{4, 8, 2, 4, 1, 2};

  /// conv1/conv2/conv3 widths; decoder widths mirror conv2 and conv1.
  static FcnOptions with_widths(int c1, int c2, int c3);
};

/// Ordered layer graph. Every node may consume earlier nodes or "input".
struct NetworkSpec {
  int input_channels = 2;
  std::vector<LayerSpec> layers;
  std::string objectness_output = "deconv6a";
  std::string box_output = "deconv6b";

  /// conv1 -> conv2 -> conv3 -> deconv4; [conv2, deconv4] -> deconv5a, deconv5b;
  /// [conv1, deconv5a] -> deconv6a (objectness); [conv1, deconv5b] -> deconv6b (boxes).
  /// Every conv/deconv except the two heads is followed by a rectifier.
  static NetworkSpec fcn(const FcnOptions& options = {});

  int index_of(const std::string& name) const;  // -1 when absent
  /// Product of all conv strides along (rows, cols).
  std::pair<int, int> total_stride() const;
  /// Checks wiring and channel counts; throws ConfigError naming the layer.
  void validate() const;
  /// Output shape of every layer for an input of (rows, cols). Throws
  /// ConfigError before any compute when the input size is not admissible.
  std::vector<FeatureShape> infer_shapes(int rows, int cols) const;
};

template <typename T>
struct LayerParams {
  std::string name;
  Tensor<T> weight;
  Tensor<T> bias;
};

/// Per parametric layer, in spec order. Gradients use the same type.
template <typename T>
using ParameterSet = std::vector<LayerParams<T>>;

template <typename T>
ParameterSet<T> zero_like(const ParameterSet<T>& params);

template <typename U, typename T>
ParameterSet<U> cast_params(const ParameterSet<T>& params) {
  ParameterSet<U> out;
  out.reserve(params.size());
  for (const auto& p : params) out.push_back({p.name, p.weight.template cast<U>(), p.bias.template cast<U>()});
  return out;
}

template <typename T>
std::size_t parameter_count(const ParameterSet<T>& params);

template <typename T>
struct ForwardCache {
  Tensor<T> input;
  std::vector<Tensor<T>> outputs;  // one per layer
};

template <typename T>
struct HeadOutputs {
  Tensor<T> objectness;
  Tensor<T> boxes;
};

template <typename T>
class Network {
 public:
  Network() = default;
  explicit Network(NetworkSpec spec);

  const NetworkSpec& spec() const { return spec_; }
  ParameterSet<T>& params() { return params_; }
  const ParameterSet<T>& params() const { return params_; }
  void set_params(ParameterSet<T> params);

  /// He-uniform kernels before rectifiers, +-sqrt(3/fan_in) for the heads; biases zero.
  void initialize(std::uint64_t seed);

  ForwardCache<T> forward(const Tensor<T>& input) const;
  HeadOutputs<T> heads(const ForwardCache<T>& cache) const;

  /// Reverse-mode pass; `upstream` maps node names to dL/d(node output).
  ParameterSet<T> backward(const ForwardCache<T>& cache,
                           const std::map<std::string, Tensor<T>>& upstream) const;
  ParameterSet<T> backward(const ForwardCache<T>& cache, const Tensor<T>& d_objectness,
                           const Tensor<T>& d_boxes) const;

  /// Index into params() of a parametric layer, -1 when absent.
  int param_index(const std::string& layer) const;

 private:
  NetworkSpec spec_;
  ParameterSet<T> params_;
  std::vector<int> param_slot_;  // layer index -> params_ index or -1
};

/// SGD with momentum: v <- momentum * v - lr * g; theta <- theta + v.
template <typename T>
class SgdMomentum {
 public:
  SgdMomentum(double lr, double momentum);

  double learning_rate() const { return lr_; }
  void set_learning_rate(double lr);
  ParameterSet<T>& velocity() { return velocity_; }
  const ParameterSet<T>& velocity() const { return velocity_; }

  /// Throws NumericError naming the layer, without touching any parameter,
  /// when a gradient is not finite.
  void step(ParameterSet<T>& params, const ParameterSet<T>& grads);

 private:
  double lr_;
  double momentum_;
  ParameterSet<T> velocity_;
};

template <typename T>
double global_norm(const ParameterSet<T>& grads);

}  // namespace lfcn
