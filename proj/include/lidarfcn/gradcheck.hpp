#pragma once

#include "lidarfcn/labels.hpp"
#include "lidarfcn/network.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace lfcn {

struct GradcheckOptions {
  int rows = 8;
  int cols = 16;
  FcnOptions net = FcnOptions::with_widths(4, 8, 16);
  int samples = 100;        // parameters checked across the full network
  double epsilon = 1e-5;
  double tolerance = 1e-4;
  std::uint64_t seed = 1;
  /// Test hook: scales the analytic gradient of this layer before comparison.
  std::string corrupt_layer;
  double corrupt_factor = 1.01;
};

struct GradcheckEntry {
  std::string suite;  // "op", "loss" or "network"
  std::string name;
  std::size_t checked = 0;
  std::size_t skipped = 0;  // samples straddling a rectifier kink
  std::size_t nonzero = 0;  // samples with a nonzero analytic gradient
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  bool passed = true;
};

struct GradcheckReport {
  std::vector<GradcheckEntry> entries;
  double tolerance = 0.0;

  bool passed() const;
  std::string format() const;
};

/// |a - n| / max(|a|, |n|, 1e-6): relative error with a floor for gradients
/// that vanish to within finite-difference round-off.
double gradient_relative_error(double analytic, double numeric);

/// Conv, deconv, rectifier, concat and softmax layers checked in isolation.
GradcheckReport check_ops(const GradcheckOptions& opts);
/// The weighted objectness + box loss with respect to both heads.
GradcheckReport check_loss(const GradcheckOptions& opts);
/// Every parametric layer of the full network through the weighted loss.
GradcheckReport check_network(const GradcheckOptions& opts);
/// All three suites.
GradcheckReport run_gradcheck(const GradcheckOptions& opts);

/// Random label map with vehicles, background, ignored and empty cells.
LabelMap random_label_map(int rows, int cols, std::uint64_t seed);

}  // namespace lfcn
