#include "lidarfcn/loss.hpp"

#include <cmath>

namespace lfcn {

double objectness_loss(double logit0, double logit1, int label) {
  const double m = std::max(logit0, logit1);
  const double lse = m + std::log(std::exp(logit0 - m) + std::exp(logit1 - m));
  return lse - (label == 1 ? logit1 : logit0);
}

double box_loss(std::span<const double> output, const EncodedBox24& target) {
  if (output.size() != target.size()) throw ConfigError("box loss needs 24 outputs");
  double s = 0.0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    const double d = output[i] - target[i];
    s += d * d;
  }
  return s;
}

double box_loss(std::span<const double> output, const LabelMap& labels, std::size_t cell) {
  if (cell >= labels.size() || labels[cell].label != 1) {
    throw ConfigError("box loss requested for non-vehicle cell " + std::to_string(cell));
  }
  return box_loss(output, labels.target(cell));
}

template <typename T>
LossResult<T> total_loss(const Tensor<T>& objectness, const Tensor<T>& boxes,
                         const LabelMap& labels, const SampleWeights& weights, double w_box) {
  const std::size_t rows = std::size_t(labels.rows());
  const std::size_t cols = std::size_t(labels.cols());
  const std::size_t n = labels.size();
  if (objectness.shape() != std::vector<std::size_t>{2, rows, cols} ||
      boxes.shape() != std::vector<std::size_t>{24, rows, cols}) {
    throw ConfigError("loss heads " + shape_string(objectness.shape()) + " / " +
                      shape_string(boxes.shape()) + " do not match the label map " +
                      std::to_string(rows) + "x" + std::to_string(cols));
  }
  if (weights.w1.size() != n || weights.w2.size() != n) {
    throw ConfigError("sample weights do not match the label map");
  }

  LossResult<T> r;
  r.d_objectness = Tensor<T>(objectness.shape());
  r.d_boxes = Tensor<T>(boxes.shape());
  for (std::size_t i = 0; i < n; ++i) {
    const CellLabel& c = labels[i];
    if (!c.in_scan || c.ignore) continue;

    const double o0 = double(objectness[i]);
    const double o1 = double(objectness[n + i]);
    const double w = weights.w1[i] * weights.w2[i];
    const double l_obj = objectness_loss(o0, o1, c.label);
    if (!std::isfinite(l_obj)) {
      throw NumericError("non-finite objectness loss at cell " + std::to_string(i) + " (row " +
                         std::to_string(i / cols) + ", col " + std::to_string(i % cols) + ")");
    }
    r.objectness += w * l_obj;
    const double p1 = 1.0 / (1.0 + std::exp(o0 - o1));
    const double p0 = 1.0 - p1;
    r.d_objectness[i] = static_cast<T>(w * (p0 - (c.label == 0 ? 1.0 : 0.0)));
    r.d_objectness[n + i] = static_cast<T>(w * (p1 - (c.label == 1 ? 1.0 : 0.0)));

    if (c.label != 1) continue;
    const EncodedBox24& target = labels.target(i);
    const double wb = w_box * weights.w2[i];
    double l_box = 0.0;
    for (std::size_t k = 0; k < 24; ++k) {
      const double d = double(boxes[k * n + i]) - target[k];
      l_box += d * d;
      r.d_boxes[k * n + i] = static_cast<T>(2.0 * wb * d);
    }
    if (!std::isfinite(l_box)) {
      throw NumericError("non-finite box loss at cell " + std::to_string(i) + " (row " +
                         std::to_string(i / cols) + ", col " + std::to_string(i % cols) + ")");
    }
    r.box += wb * l_box;
  }
  r.total = r.objectness + r.box;
  return r;
}

template LossResult<float> total_loss(const Tensor<float>&, const Tensor<float>&, const LabelMap&,
                                      const SampleWeights&, double);
template LossResult<double> total_loss(const Tensor<double>&, const Tensor<double>&,
                                       const LabelMap&, const SampleWeights&, double);

}  // namespace lfcn
