#pragma once

#include "lidarfcn/labels.hpp"
#include "lidarfcn/tensor.hpp"

namespace lfcn {

/// -log softmax(logits)[label], evaluated stably.
double objectness_loss(double logit0, double logit1, int label);

/// Squared Euclidean distance between a 24-d prediction and its target.
double box_loss(std::span<const double> output, const EncodedBox24& target);
/// Box loss of cell `cell`; throws ConfigError unless it is a vehicle cell.
double box_loss(std::span<const double> output, const LabelMap& labels, std::size_t cell);

template <typename T>
struct LossResult {
  double objectness = 0.0;  // sum of w1 * w2 * L_obj
  double box = 0.0;         // w_box * sum of w2 * L_box
  double total = 0.0;
  Tensor<T> d_objectness;
  Tensor<T> d_boxes;
};

/// Weighted multi-task loss over one point map and its analytic gradients
/// with respect to both heads. Ignored and empty cells contribute nothing.
/// Throws NumericError naming the first cell with a non-finite loss.
template <typename T>
LossResult<T> total_loss(const Tensor<T>& objectness, const Tensor<T>& boxes,
                         const LabelMap& labels, const SampleWeights& weights, double w_box);

}  // namespace lfcn
