#include "lidarfcn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace lfcn {

namespace {

class ByteWriter {
 public:
  void u8(std::uint8_t v) { bytes_.push_back(char(v)); }
  void u16(std::uint16_t v) { le(v, 2); }
  void u32(std::uint32_t v) { le(v, 4); }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void raw(const std::string& s) { bytes_.insert(bytes_.end(), s.begin(), s.end()); }
  const std::string& bytes() const { return bytes_; }

 private:
  void le(std::uint32_t v, int n) {
    for (int i = 0; i < n; ++i) bytes_.push_back(char((v >> (8 * i)) & 0xFF));
  }
  std::string bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(std::string bytes) : bytes_(std::move(bytes)) {}

  std::uint8_t u8() { return std::uint8_t(take(1)[0]); }
  std::uint16_t u16() { return std::uint16_t(le(2)); }
  std::uint32_t u32() { return le(4); }
  float f32() { return std::bit_cast<float>(u32()); }
  std::string raw(std::size_t n) { return std::string(take(n), n); }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  const char* take(std::size_t n) {
    if (remaining() < n) {
      throw DataError("checkpoint truncated at byte " + std::to_string(pos_) + " (needed " +
                      std::to_string(n) + " more bytes)");
    }
    const char* p = bytes_.data() + pos_;
    pos_ += n;
    return p;
  }
  std::uint32_t le(int n) {
    const char* p = take(std::size_t(n));
    std::uint32_t v = 0;
    for (int i = 0; i < n; ++i) v |= std::uint32_t(std::uint8_t(p[i])) << (8 * i);
    return v;
  }
  std::string bytes_;
  std::size_t pos_ = 0;
};

std::vector<const LayerSpec*> parametric_layers(const NetworkSpec& spec) {
  std::vector<const LayerSpec*> out;
  for (const auto& l : spec.layers) {
    if (l.has_params()) out.push_back(&l);
  }
  return out;
}

}  // namespace

void save_checkpoint(const ParameterSet<float>& params, const NetworkSpec& spec,
                     const std::filesystem::path& path) {
  const auto layers = parametric_layers(spec);
  if (layers.size() != params.size()) throw ConfigError("parameter set does not match the network");
  ByteWriter w;
  w.raw("LFCN");
  w.u32(kCheckpointVersion);
  w.u32(std::uint32_t(params.size()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& p = params[i];
    if (p.name != layers[i]->name || p.weight.shape() != layers[i]->kernel_shape() ||
        p.bias.size() != std::size_t(layers[i]->out_channels)) {
      throw ConfigError("parameter layer '" + p.name + "' does not match the network spec");
    }
    w.u16(std::uint16_t(p.name.size()));
    w.raw(p.name);
    w.u8(std::uint8_t(p.weight.ndim()));
    for (auto d : p.weight.shape()) w.u32(std::uint32_t(d));
    for (float v : p.weight.values()) w.f32(v);
    for (float v : p.bias.values()) w.f32(v);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write checkpoint " + path.string());
  out.write(w.bytes().data(), std::streamsize(w.bytes().size()));
  if (!out) throw DataError("failed writing checkpoint " + path.string());
}

ParameterSet<float> load_checkpoint(const std::filesystem::path& path, const NetworkSpec& spec) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  ByteReader r(std::string(std::istreambuf_iterator<char>(in), {}));

  if (r.remaining() < 4 || r.raw(4) != "LFCN") throw DataError(path.string() + ": bad checkpoint magic");
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw DataError(path.string() + ": unsupported checkpoint version " + std::to_string(version));
  }
  const auto layers = parametric_layers(spec);
  const std::uint32_t count = r.u32();

  ParameterSet<float> params;
  for (std::uint32_t i = 0; i < count; ++i) {
    LayerParams<float> p;
    p.name = r.raw(r.u16());
    const std::uint8_t ndim = r.u8();
    std::vector<std::size_t> dims;
    for (std::uint8_t k = 0; k < ndim; ++k) dims.push_back(r.u32());
    if (i >= layers.size()) {
      throw ConfigError("checkpoint layer '" + p.name + "' has no counterpart in the network spec");
    }
    const LayerSpec& l = *layers[i];
    if (p.name != l.name || dims != l.kernel_shape()) {
      throw ConfigError("checkpoint layer '" + p.name + "' " + shape_string(dims) +
                        " does not match network layer '" + l.name + "' " +
                        shape_string(l.kernel_shape()));
    }
    p.weight = Tensor<float>(dims);
    for (auto& v : p.weight.values()) v = r.f32();
    p.bias = Tensor<float>({std::size_t(l.out_channels)});
    for (auto& v : p.bias.values()) v = r.f32();
    params.push_back(std::move(p));
  }
  if (count != layers.size()) {
    throw ConfigError("checkpoint has " + std::to_string(count) + " layers, network spec needs " +
                      std::to_string(layers.size()) + " (first missing: '" +
                      layers[count < layers.size() ? count : 0]->name + "')");
  }
  if (r.remaining() != 0) {
    throw DataError(path.string() + ": " + std::to_string(r.remaining()) + " trailing bytes");
  }
  return params;
}

}  // namespace lfcn
