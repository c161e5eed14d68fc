#include "lidarfcn/gradcheck.hpp"

#include "lidarfcn/loss.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

namespace lfcn {

bool GradcheckReport::passed() const {
  return std::all_of(entries.begin(), entries.end(), [](const GradcheckEntry& e) { return e.passed; });
}

std::string GradcheckReport::format() const {
  std::string out = "suite    layer                      checked  nonzero  skipped  max_rel_err  max_abs_err  result\n";
  char buf[256];
  for (const auto& e : entries) {
    std::snprintf(buf, sizeof(buf), "%-8s %-26s %7zu  %7zu  %7zu  %11.3e  %11.3e  %s\n", e.suite.c_str(),
                  e.name.c_str(), e.checked, e.nonzero, e.skipped, e.max_rel_error, e.max_abs_error,
                  e.passed ? "ok" : "FAIL");
    out += buf;
  }
  std::snprintf(buf, sizeof(buf), "tolerance %.1e: %s\n", tolerance, passed() ? "passed" : "FAILED");
  out += buf;
  return out;
}

double gradient_relative_error(double analytic, double numeric) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
  return std::abs(analytic - numeric) / scale;
}

namespace {

using TensorD = Tensor<double>;

void fill_uniform(TensorD& t, std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> d(lo, hi);
  for (auto& v : t.values()) v = d(rng);
}

struct Accumulator {
  GradcheckEntry entry;
  double tolerance;
  double corrupt = 1.0;

  void add(double analytic, double numeric) {
    analytic *= corrupt;
    ++entry.checked;
    entry.nonzero += analytic != 0.0 ? 1 : 0;
    entry.max_rel_error = std::max(entry.max_rel_error, gradient_relative_error(analytic, numeric));
    entry.max_abs_error = std::max(entry.max_abs_error, std::abs(analytic - numeric));
  }
  GradcheckEntry finish() {
    // A suite where every sampled gradient vanishes proves nothing.
    entry.passed = entry.nonzero > 0 && entry.max_rel_error < tolerance;
    return entry;
  }
};

Accumulator accumulator(const GradcheckOptions& opts, const std::string& suite, const std::string& name) {
  Accumulator a{{suite, name}, opts.tolerance};
  if (!opts.corrupt_layer.empty() && opts.corrupt_layer == name) a.corrupt = opts.corrupt_factor;
  return a;
}

/// Checks every element of `x` against d<f(x), r>/dx.
template <typename F>
void check_all(Accumulator& acc, TensorD& x, const TensorD& analytic, const F& objective, double eps) {
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + eps;
    const double fp = objective();
    x[i] = saved - eps;
    const double fm = objective();
    x[i] = saved;
    acc.add(analytic[i], (fp - fm) / (2.0 * eps));
  }
}

}  // namespace

GradcheckReport check_ops(const GradcheckOptions& opts) {
  GradcheckReport report;
  report.tolerance = opts.tolerance;
  std::mt19937_64 rng(opts.seed);
  const double eps = opts.epsilon;

  {  // convolution with unequal strides and padding
    const Conv2dGeometry g{3, 5, 2, 3, 1, 2};
    TensorD x({3, 7, 9}), w({4, 3, 3, 5}), b({4});
    fill_uniform(x, rng, -1, 1);
    fill_uniform(w, rng, -1, 1);
    fill_uniform(b, rng, -1, 1);
    TensorD r(conv2d_forward(x, w, b, g).shape());
    fill_uniform(r, rng, -1, 1);
    const auto grads = conv2d_backward(x, w, r, g);
    auto f = [&] { return dot(conv2d_forward(x, w, b, g), r); };
    Accumulator acc = accumulator(opts, "op", "conv");
    check_all(acc, x, grads.dx, f, eps);
    check_all(acc, w, grads.dw, f, eps);
    check_all(acc, b, grads.db, f, eps);
    report.entries.push_back(acc.finish());
  }
  {  // transposed convolution
    const Conv2dGeometry g{4, 6, 2, 3, 1, 1};
    TensorD x({3, 4, 5}), w({3, 2, 4, 6}), b({2});
    fill_uniform(x, rng, -1, 1);
    fill_uniform(w, rng, -1, 1);
    fill_uniform(b, rng, -1, 1);
    TensorD r(deconv2d_forward(x, w, b, g).shape());
    fill_uniform(r, rng, -1, 1);
    const auto grads = deconv2d_backward(x, w, r, g);
    auto f = [&] { return dot(deconv2d_forward(x, w, b, g), r); };
    Accumulator acc = accumulator(opts, "op", "deconv");
    check_all(acc, x, grads.dx, f, eps);
    check_all(acc, w, grads.dw, f, eps);
    check_all(acc, b, grads.db, f, eps);
    report.entries.push_back(acc.finish());
  }
  {  // rectifier, inputs kept away from the kink
    TensorD x({3, 4, 5});
    std::uniform_real_distribution<double> mag(0.1, 1.0);
    std::bernoulli_distribution sign(0.5);
    for (auto& v : x.values()) v = sign(rng) ? mag(rng) : -mag(rng);
    TensorD r(x.shape());
    fill_uniform(r, rng, -1, 1);
    const TensorD dx = relu_backward(x, r);
    Accumulator acc = accumulator(opts, "op", "relu");
    check_all(acc, x, dx, [&] { return dot(relu_forward(x), r); }, eps);
    report.entries.push_back(acc.finish());
  }
  {  // channel concatenation
    TensorD a({2, 3, 4}), b({3, 3, 4});
    fill_uniform(a, rng, -1, 1);
    fill_uniform(b, rng, -1, 1);
    TensorD r({5, 3, 4});
    fill_uniform(r, rng, -1, 1);
    TensorD da(a.shape()), db(b.shape());
    std::copy(r.data(), r.data() + a.size(), da.data());
    std::copy(r.data() + a.size(), r.data() + r.size(), db.data());
    auto f = [&] { return dot(concat_channels(a, b), r); };
    Accumulator acc = accumulator(opts, "op", "concat");
    check_all(acc, a, da, f, eps);
    check_all(acc, b, db, f, eps);
    report.entries.push_back(acc.finish());
  }
  {  // two-channel softmax
    TensorD x({2, 3, 4});
    fill_uniform(x, rng, -3, 3);
    TensorD r(x.shape());
    fill_uniform(r, rng, -1, 1);
    const TensorD dx = softmax2_backward(softmax2_forward(x), r);
    Accumulator acc = accumulator(opts, "op", "softmax2");
    check_all(acc, x, dx, [&] { return dot(softmax2_forward(x), r); }, eps);
    report.entries.push_back(acc.finish());
  }
  return report;
}

LabelMap random_label_map(int rows, int cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> target(0.0, 2.0);
  constexpr int kVehicles = 3;
  LabelMap labels(rows, cols);
  labels.points_per_box.assign(kVehicles, 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    CellLabel& c = labels[i];
    const double draw = u(rng);
    if (i > 1 && draw < 0.15) continue;  // empty cell
    c.in_scan = true;
    if (i > 1 && draw < 0.25) {
      c.ignore = true;
      continue;
    }
    if (i == 0 || (i > 1 && draw > 0.7)) {
      c.label = 1;
      c.vehicle = int(rng() % kVehicles);
      if (i == 0) c.vehicle = 0;
      ++labels.points_per_box[std::size_t(c.vehicle)];
      for (auto& v : labels.target(i)) v = target(rng);
    }
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    CellLabel& c = labels[i];
    if (c.label == 1) c.vehicle_points = labels.points_per_box[std::size_t(c.vehicle)];
  }
  return labels;
}

namespace {

LossConfig toy_loss_config(const LabelMap& labels) {
  LossConfig cfg;
  double total = 0.0;
  int count = 0;
  for (int n : labels.points_per_box) {
    if (n > 0) {
      total += n;
      ++count;
    }
  }
  cfg.mean_vehicle_points = count ? total / count : 1.0;
  cfg.w_box = 0.05;
  return cfg;
}

}  // namespace

GradcheckReport check_loss(const GradcheckOptions& opts) {
  GradcheckReport report;
  report.tolerance = opts.tolerance;
  std::mt19937_64 rng(opts.seed + 17);
  const LabelMap labels = random_label_map(opts.rows, opts.cols, opts.seed + 18);
  const LossConfig cfg = toy_loss_config(labels);
  const SampleWeights weights = sample_weights(labels, cfg);
  const std::size_t rows = std::size_t(opts.rows), cols = std::size_t(opts.cols);
  TensorD obj({2, rows, cols}), boxes({24, rows, cols});
  fill_uniform(obj, rng, -3, 3);
  fill_uniform(boxes, rng, -4, 4);
  const auto result = total_loss(obj, boxes, labels, weights, cfg.w_box);
  auto f = [&] { return total_loss(obj, boxes, labels, weights, cfg.w_box).total; };
  Accumulator a = accumulator(opts, "loss", "objectness");
  check_all(a, obj, result.d_objectness, f, opts.epsilon);
  report.entries.push_back(a.finish());
  Accumulator b = accumulator(opts, "loss", "boxes");
  check_all(b, boxes, result.d_boxes, f, opts.epsilon);
  report.entries.push_back(b.finish());
  return report;
}

namespace {

std::vector<bool> relu_masks(const NetworkSpec& spec, const ForwardCache<double>& cache) {
  std::vector<bool> mask;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    if (spec.layers[i].kind != LayerKind::Relu) continue;
    for (double v : cache.outputs[i].values()) mask.push_back(v > 0.0);
  }
  return mask;
}

}  // namespace

GradcheckReport check_network(const GradcheckOptions& opts) {
  GradcheckReport report;
  report.tolerance = opts.tolerance;
  const NetworkSpec spec = NetworkSpec::fcn(opts.net);
  spec.infer_shapes(opts.rows, opts.cols);
  Network<double> net(spec);
  net.initialize(opts.seed);
  std::mt19937_64 rng(opts.seed + 101);
  // Positive biases keep most rectifiers active so every layer sees gradient.
  for (auto& p : net.params()) fill_uniform(p.bias, rng, 0.05, 0.3);

  TensorD input({std::size_t(spec.input_channels), std::size_t(opts.rows), std::size_t(opts.cols)});
  fill_uniform(input, rng, 0.0, 1.0);
  const LabelMap labels = random_label_map(opts.rows, opts.cols, opts.seed + 102);
  const LossConfig cfg = toy_loss_config(labels);
  const SampleWeights weights = sample_weights(labels, cfg);

  auto loss_of = [&](const ForwardCache<double>& cache) {
    const auto h = net.heads(cache);
    return total_loss(h.objectness, h.boxes, labels, weights, cfg.w_box);
  };
  const ForwardCache<double> base = net.forward(input);
  const std::vector<bool> base_mask = relu_masks(spec, base);
  const auto base_loss = loss_of(base);
  const ParameterSet<double> grads = net.backward(base, base_loss.d_objectness, base_loss.d_boxes);

  const std::size_t layers = net.params().size();
  const int per_layer = std::max(2, int((opts.samples + int(layers) - 1) / int(layers)));
  for (std::size_t li = 0; li < layers; ++li) {
    auto& p = net.params()[li];
    Accumulator acc = accumulator(opts, "network", p.name);
    const std::size_t nw = p.weight.size();
    const std::size_t total = nw + p.bias.size();
    int attempts = 0;
    while (int(acc.entry.checked) < per_layer && attempts < per_layer * 20) {
      ++attempts;
      // The first sample of every layer is a bias.
      const std::size_t k = acc.entry.checked == 0 ? nw + rng() % p.bias.size() : rng() % total;
      double& theta = k < nw ? p.weight[k] : p.bias[k - nw];
      const double analytic = k < nw ? grads[li].weight[k] : grads[li].bias[k - nw];
      const double saved = theta;
      theta = saved + opts.epsilon;
      const auto plus = net.forward(input);
      theta = saved - opts.epsilon;
      const auto minus = net.forward(input);
      theta = saved;
      if (relu_masks(spec, plus) != base_mask || relu_masks(spec, minus) != base_mask) {
        ++acc.entry.skipped;  // the perturbation crosses a rectifier kink
        continue;
      }
      acc.add(analytic, (loss_of(plus).total - loss_of(minus).total) / (2.0 * opts.epsilon));
    }
    report.entries.push_back(acc.finish());
  }
  return report;
}

GradcheckReport run_gradcheck(const GradcheckOptions& opts) {
  GradcheckReport report;
  report.tolerance = opts.tolerance;
  for (const auto& part : {check_ops(opts), check_loss(opts), check_network(opts)}) {
    report.entries.insert(report.entries.end(), part.entries.begin(), part.entries.end());
  }
  return report;
}

}  // namespace lfcn
