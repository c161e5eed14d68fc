#include "lidarfcn/network.hpp"

#include <cmath>
#include <set>

namespace lfcn {

std::string to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::Conv: return "conv";
    case LayerKind::Deconv: return "deconv";
    case LayerKind::Relu: return "relu";
    case LayerKind::Concat: return "concat";
    case LayerKind::Softmax2: return "softmax2";
  }
  return "?";
}

std::vector<std::size_t> LayerSpec::kernel_shape() const {
  const auto kh = std::size_t(geometry.kernel_rows);
  const auto kw = std::size_t(geometry.kernel_cols);
  if (kind == LayerKind::Conv) return {std::size_t(out_channels), std::size_t(in_channels), kh, kw};
  if (kind == LayerKind::Deconv) return {std::size_t(in_channels), std::size_t(out_channels), kh, kw};
  return {};
}

FcnOptions FcnOptions::with_widths(int c1, int c2, int c3) {
  FcnOptions o;
  o.conv1_channels = c1;
  o.conv2_channels = c2;
  o.conv3_channels = c3;
  o.deconv4_channels = c2;
  o.deconv5_channels = c1;
  return o;
}

NetworkSpec NetworkSpec::fcn(const FcnOptions& o) {
  NetworkSpec spec;
  spec.input_channels = o.input_channels;
  auto& L = spec.layers;
  auto param = [&](std::string name, LayerKind kind, std::string in, int cin, int cout,
                   const Conv2dGeometry& g) {
    L.push_back({std::move(name), kind, {std::move(in)}, cin, cout, g});
  };
  auto relu = [&](const std::string& in, int c) {
    L.push_back({in + "_relu", LayerKind::Relu, {in}, c, c, {}});
  };
  auto concat = [&](std::string name, std::string a, std::string b, int ca, int cb) {
    L.push_back({std::move(name), LayerKind::Concat, {std::move(a), std::move(b)}, ca + cb, ca + cb, {}});
  };

  const int c1 = o.conv1_channels, c2 = o.conv2_channels, c3 = o.conv3_channels;
  const int d4 = o.deconv4_channels, d5 = o.deconv5_channels;
  param("conv1", LayerKind::Conv, "input", o.input_channels, c1, o.conv1);
  relu("conv1", c1);
  param("conv2", LayerKind::Conv, "conv1_relu", c1, c2, o.conv23);
  relu("conv2", c2);
  param("conv3", LayerKind::Conv, "conv2_relu", c2, c3, o.conv23);
  relu("conv3", c3);
  param("deconv4", LayerKind::Deconv, "conv3_relu", c3, d4, o.deconv45);
  relu("deconv4", d4);
  concat("concat_conv2_deconv4", "conv2_relu", "deconv4_relu", c2, d4);
  param("deconv5a", LayerKind::Deconv, "concat_conv2_deconv4", c2 + d4, d5, o.deconv45);
  relu("deconv5a", d5);
  param("deconv5b", LayerKind::Deconv, "concat_conv2_deconv4", c2 + d4, d5, o.deconv45);
  relu("deconv5b", d5);
  concat("concat_conv1_deconv5a", "conv1_relu", "deconv5a_relu", c1, d5);
  concat("concat_conv1_deconv5b", "conv1_relu", "deconv5b_relu", c1, d5);
  param("deconv6a", LayerKind::Deconv, "concat_conv1_deconv5a", c1 + d5, o.objectness_channels,
        o.deconv6);
  param("deconv6b", LayerKind::Deconv, "concat_conv1_deconv5b", c1 + d5, o.box_channels, o.deconv6);
  spec.validate();
  return spec;
}

int NetworkSpec::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (layers[i].name == name) return int(i);
  }
  return -1;
}

std::pair<int, int> NetworkSpec::total_stride() const {
  int sr = 1, sc = 1;
  for (const auto& l : layers) {
    if (l.kind == LayerKind::Conv) {
      sr *= l.geometry.stride_rows;
      sc *= l.geometry.stride_cols;
    }
  }
  return {sr, sc};
}

void NetworkSpec::validate() const {
  std::map<std::string, int> channels{{"input", input_channels}};
  for (const auto& l : layers) {
    const std::string where = "layer '" + l.name + "'";
    if (l.name.empty() || l.name == "input" || channels.count(l.name)) {
      throw ConfigError(where + ": empty or duplicate name");
    }
    if (l.name.size() > 0xFFFF) throw ConfigError(where + ": name too long");
    std::vector<int> in_ch;
    for (const auto& in : l.inputs) {
      auto it = channels.find(in);
      if (it == channels.end()) throw ConfigError(where + ": unknown input '" + in + "'");
      in_ch.push_back(it->second);
    }
    const std::size_t want_inputs = l.kind == LayerKind::Concat ? 2 : 1;
    if (l.inputs.size() != want_inputs) {
      throw ConfigError(where + ": expects " + std::to_string(want_inputs) + " input(s)");
    }
    int out = 0;
    switch (l.kind) {
      case LayerKind::Conv:
      case LayerKind::Deconv: {
        if (in_ch[0] != l.in_channels || l.out_channels < 1) {
          throw ConfigError(where + ": declares " + std::to_string(l.in_channels) +
                            " input channels but receives " + std::to_string(in_ch[0]));
        }
        const auto& g = l.geometry;
        if (g.kernel_rows < 1 || g.kernel_cols < 1 || g.stride_rows < 1 || g.stride_cols < 1 ||
            g.pad_rows < 0 || g.pad_cols < 0) {
          throw ConfigError(where + ": invalid kernel/stride/padding");
        }
        if (l.kind == LayerKind::Deconv &&
            (g.kernel_rows < g.stride_rows || g.kernel_cols < g.stride_cols)) {
          throw ConfigError(where + ": deconvolution kernel smaller than stride");
        }
        out = l.out_channels;
        break;
      }
      case LayerKind::Relu: out = in_ch[0]; break;
      case LayerKind::Softmax2:
        if (in_ch[0] != 2) throw ConfigError(where + ": softmax2 needs 2 channels");
        out = 2;
        break;
      case LayerKind::Concat: out = in_ch[0] + in_ch[1]; break;
    }
    channels[l.name] = out;
  }
  for (const auto* head : {&objectness_output, &box_output}) {
    if (!channels.count(*head) || *head == "input") {
      throw ConfigError("network output '" + *head + "' is not a layer");
    }
  }
}

std::vector<FeatureShape> NetworkSpec::infer_shapes(int rows, int cols) const {
  validate();
  const auto [sr, sc] = total_stride();
  if (rows < 1 || cols < 1 || rows % sr != 0 || cols % sc != 0) {
    throw ConfigError("input " + std::to_string(rows) + "x" + std::to_string(cols) +
                      " is not divisible by the network stride " + std::to_string(sr) + "x" +
                      std::to_string(sc));
  }
  std::map<std::string, FeatureShape> shapes{
      {"input", {std::size_t(input_channels), std::size_t(rows), std::size_t(cols)}}};
  std::vector<FeatureShape> out;
  for (const auto& l : layers) {
    const FeatureShape& a = shapes.at(l.inputs[0]);
    FeatureShape s = a;
    const auto& g = l.geometry;
    switch (l.kind) {
      case LayerKind::Conv:
        s = {std::size_t(l.out_channels), std::size_t(g.conv_rows(int(a.rows))),
             std::size_t(g.conv_cols(int(a.cols)))};
        if (int(g.conv_rows(int(a.rows))) < 1 || int(g.conv_cols(int(a.cols))) < 1) {
          throw ConfigError("layer '" + l.name + "': input too small");
        }
        break;
      case LayerKind::Deconv:
        s = {std::size_t(l.out_channels), std::size_t(g.deconv_rows(int(a.rows))),
             std::size_t(g.deconv_cols(int(a.cols)))};
        break;
      case LayerKind::Relu:
      case LayerKind::Softmax2: break;
      case LayerKind::Concat: {
        const FeatureShape& b = shapes.at(l.inputs[1]);
        if (a.rows != b.rows || a.cols != b.cols) {
          throw ConfigError("layer '" + l.name + "': cannot concatenate " + l.inputs[0] + " (" +
                            std::to_string(a.rows) + "x" + std::to_string(a.cols) + ") with " +
                            l.inputs[1] + " (" + std::to_string(b.rows) + "x" +
                            std::to_string(b.cols) + ")");
        }
        s.channels = a.channels + b.channels;
        break;
      }
    }
    shapes[l.name] = s;
    out.push_back(s);
  }
  for (const auto* head : {&objectness_output, &box_output}) {
    const auto& s = shapes.at(*head);
    if (s.rows != std::size_t(rows) || s.cols != std::size_t(cols)) {
      throw ConfigError("output '" + *head + "' is " + std::to_string(s.rows) + "x" +
                        std::to_string(s.cols) + ", expected the input size " +
                        std::to_string(rows) + "x" + std::to_string(cols));
    }
  }
  return out;
}

template <typename T>
ParameterSet<T> zero_like(const ParameterSet<T>& params) {
  ParameterSet<T> out;
  out.reserve(params.size());
  for (const auto& p : params) out.push_back({p.name, Tensor<T>(p.weight.shape()), Tensor<T>(p.bias.shape())});
  return out;
}

template <typename T>
std::size_t parameter_count(const ParameterSet<T>& params) {
  std::size_t n = 0;
  for (const auto& p : params) n += p.weight.size() + p.bias.size();
  return n;
}

template <typename T>
Network<T>::Network(NetworkSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  param_slot_.assign(spec_.layers.size(), -1);
  for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
    const auto& l = spec_.layers[i];
    if (!l.has_params()) continue;
    param_slot_[i] = int(params_.size());
    params_.push_back({l.name, Tensor<T>(l.kernel_shape()), Tensor<T>({std::size_t(l.out_channels)})});
  }
}

template <typename T>
void Network<T>::set_params(ParameterSet<T> params) {
  if (params.size() != params_.size()) {
    throw ConfigError("parameter set has " + std::to_string(params.size()) + " layers, network has " +
                      std::to_string(params_.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].name != params_[i].name || params[i].weight.shape() != params_[i].weight.shape() ||
        params[i].bias.shape() != params_[i].bias.shape()) {
      throw ConfigError("parameter layer '" + params[i].name + "' does not match layer '" +
                        params_[i].name + "'");
    }
  }
  params_ = std::move(params);
}

template <typename T>
void Network<T>::initialize(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
    if (param_slot_[i] < 0) continue;
    const auto& l = spec_.layers[i];
    const auto& g = l.geometry;
    double fan_in = double(l.in_channels) * g.kernel_rows * g.kernel_cols;
    if (l.kind == LayerKind::Deconv) fan_in /= double(g.stride_rows) * g.stride_cols;
    // He-uniform ahead of a rectifier, unit-gain uniform for the heads.
    const bool head = l.name == spec_.objectness_output || l.name == spec_.box_output;
    const double bound = std::sqrt((head ? 3.0 : 6.0) / fan_in);
    std::uniform_real_distribution<double> dist(-bound, bound);
    auto& p = params_[param_slot_[i]];
    for (auto& w : p.weight.values()) w = static_cast<T>(dist(rng));
    p.bias.fill(T(0));
  }
}

template <typename T>
int Network<T>::param_index(const std::string& layer) const {
  const int i = spec_.index_of(layer);
  return i < 0 ? -1 : param_slot_[i];
}

template <typename T>
ForwardCache<T> Network<T>::forward(const Tensor<T>& input) const {
  if (input.ndim() != 3 || input.channels() != std::size_t(spec_.input_channels)) {
    throw ConfigError("network input must be (" + std::to_string(spec_.input_channels) +
                      ", H, W), got " + shape_string(input.shape()));
  }
  spec_.infer_shapes(int(input.rows()), int(input.cols()));

  ForwardCache<T> cache;
  cache.input = input;
  cache.outputs.reserve(spec_.layers.size());
  auto node = [&](const std::string& name) -> const Tensor<T>& {
    if (name == "input") return cache.input;
    return cache.outputs[spec_.index_of(name)];
  };
  for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
    const auto& l = spec_.layers[i];
    const Tensor<T>& x = node(l.inputs[0]);
    switch (l.kind) {
      case LayerKind::Conv: {
        const auto& p = params_[param_slot_[i]];
        cache.outputs.push_back(conv2d_forward(x, p.weight, p.bias, l.geometry, l.name));
        break;
      }
      case LayerKind::Deconv: {
        const auto& p = params_[param_slot_[i]];
        cache.outputs.push_back(deconv2d_forward(x, p.weight, p.bias, l.geometry, l.name));
        break;
      }
      case LayerKind::Relu: cache.outputs.push_back(relu_forward(x)); break;
      case LayerKind::Softmax2: cache.outputs.push_back(softmax2_forward(x)); break;
      case LayerKind::Concat:
        cache.outputs.push_back(concat_channels(x, node(l.inputs[1]), l.name));
        break;
    }
  }
  return cache;
}

template <typename T>
HeadOutputs<T> Network<T>::heads(const ForwardCache<T>& cache) const {
  if (cache.outputs.size() != spec_.layers.size()) throw ConfigError("forward cache is incomplete");
  return {cache.outputs[spec_.index_of(spec_.objectness_output)],
          cache.outputs[spec_.index_of(spec_.box_output)]};
}

namespace {

template <typename T>
void accumulate(Tensor<T>& into, const Tensor<T>& g) {
  if (into.empty()) {
    into = g;
    return;
  }
  for (std::size_t i = 0; i < g.size(); ++i) into[i] += g[i];
}

}  // namespace

template <typename T>
ParameterSet<T> Network<T>::backward(const ForwardCache<T>& cache,
                                     const std::map<std::string, Tensor<T>>& upstream) const {
  const std::size_t n = spec_.layers.size();
  if (cache.outputs.size() != n || cache.input.empty()) {
    throw ConfigError("backward needs the forward cache of the same input");
  }
  std::vector<Tensor<T>> grad(n);
  for (const auto& [name, g] : upstream) {
    const int i = spec_.index_of(name);
    if (i < 0) throw ConfigError("upstream gradient for unknown layer '" + name + "'");
    if (g.shape() != cache.outputs[i].shape()) {
      throw ConfigError("upstream gradient for '" + name + "' has shape " + shape_string(g.shape()) +
                        ", output is " + shape_string(cache.outputs[i].shape()));
    }
    accumulate(grad[i], g);
  }

  ParameterSet<T> pgrads = zero_like(params_);
  Tensor<T> input_grad;
  auto add_to = [&](const std::string& name, const Tensor<T>& g) {
    if (name == "input") accumulate(input_grad, g);
    else accumulate(grad[spec_.index_of(name)], g);
  };
  auto value = [&](const std::string& name) -> const Tensor<T>& {
    if (name == "input") return cache.input;
    return cache.outputs[spec_.index_of(name)];
  };

  for (std::size_t k = n; k-- > 0;) {
    if (grad[k].empty()) continue;
    const auto& l = spec_.layers[k];
    const Tensor<T>& dy = grad[k];
    const Tensor<T>& x = value(l.inputs[0]);
    switch (l.kind) {
      case LayerKind::Conv:
      case LayerKind::Deconv: {
        const int slot = param_slot_[k];
        const auto& p = params_[slot];
        auto g = l.kind == LayerKind::Conv ? conv2d_backward(x, p.weight, dy, l.geometry)
                                           : deconv2d_backward(x, p.weight, dy, l.geometry);
        pgrads[slot].weight = std::move(g.dw);
        pgrads[slot].bias = std::move(g.db);
        add_to(l.inputs[0], g.dx);
        break;
      }
      case LayerKind::Relu: add_to(l.inputs[0], relu_backward(x, dy)); break;
      case LayerKind::Softmax2: add_to(l.inputs[0], softmax2_backward(cache.outputs[k], dy)); break;
      case LayerKind::Concat: {
        const Tensor<T>& b = value(l.inputs[1]);
        Tensor<T> da(x.shape());
        Tensor<T> db(b.shape());
        std::copy(dy.data(), dy.data() + da.size(), da.data());
        std::copy(dy.data() + da.size(), dy.data() + dy.size(), db.data());
        add_to(l.inputs[0], da);
        add_to(l.inputs[1], db);
        break;
      }
    }
  }
  return pgrads;
}

template <typename T>
ParameterSet<T> Network<T>::backward(const ForwardCache<T>& cache, const Tensor<T>& d_objectness,
                                     const Tensor<T>& d_boxes) const {
  return backward(cache, {{spec_.objectness_output, d_objectness}, {spec_.box_output, d_boxes}});
}

template <typename T>
SgdMomentum<T>::SgdMomentum(double lr, double momentum) : lr_(lr), momentum_(momentum) {
  set_learning_rate(lr);
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must lie in [0, 1)");
}

template <typename T>
void SgdMomentum<T>::set_learning_rate(double lr) {
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw ConfigError("learning rate must be finite and >= 0");
  lr_ = lr;
}

template <typename T>
void SgdMomentum<T>::step(ParameterSet<T>& params, const ParameterSet<T>& grads) {
  if (grads.size() != params.size()) throw ConfigError("gradient/parameter layer count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (grads[i].weight.shape() != params[i].weight.shape() ||
        grads[i].bias.shape() != params[i].bias.shape()) {
      throw ConfigError("gradient shape mismatch in layer '" + params[i].name + "'");
    }
    if (!grads[i].weight.all_finite() || !grads[i].bias.all_finite()) {
      throw NumericError("non-finite gradient in layer '" + params[i].name + "'");
    }
  }
  if (velocity_.size() != params.size()) velocity_ = zero_like(params);
  const T lr = static_cast<T>(lr_);
  const T mu = static_cast<T>(momentum_);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto update = [&](Tensor<T>& theta, Tensor<T>& v, const Tensor<T>& g) {
      for (std::size_t k = 0; k < theta.size(); ++k) {
        v[k] = mu * v[k] - lr * g[k];
        theta[k] += v[k];
      }
    };
    update(params[i].weight, velocity_[i].weight, grads[i].weight);
    update(params[i].bias, velocity_[i].bias, grads[i].bias);
  }
}

template <typename T>
double global_norm(const ParameterSet<T>& grads) {
  double s = 0.0;
  for (const auto& g : grads) {
    for (T v : g.weight.values()) s += double(v) * double(v);
    for (T v : g.bias.values()) s += double(v) * double(v);
  }
  return std::sqrt(s);
}

template ParameterSet<float> zero_like(const ParameterSet<float>&);
template ParameterSet<double> zero_like(const ParameterSet<double>&);
template std::size_t parameter_count(const ParameterSet<float>&);
template std::size_t parameter_count(const ParameterSet<double>&);
template class Network<float>;
template class Network<double>;
template class SgdMomentum<float>;
template class SgdMomentum<double>;
template double global_norm(const ParameterSet<float>&);
template double global_norm(const ParameterSet<double>&);

}  // namespace lfcn
