#pragma once

#include "lidarfcn/labels.hpp"
#include "lidarfcn/loss.hpp"
#include "lidarfcn/network.hpp"
#include "lidarfcn/pointmap.hpp"

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace lfcn {

struct TrainingSample {
  std::string id;
  RawScan scan;
  std::vector<LabeledBox> boxes;
};

struct AugmentConfig {
  double max_rotation = deg2rad(10.0);  // about z, radians
  double max_translation_xy = 1.0;
  double max_translation_z = 0.2;

  void validate() const;
};

/// Applies one rigid transform to the points and to every box (yaw += angle).
TrainingSample transform_sample(const TrainingSample& sample, double angle, const Point3& translation);

/// Draws a z-rotation in +-max_rotation and a per-axis translation in the
/// configured ranges, then applies it before projection.
TrainingSample augment(const TrainingSample& sample, const AugmentConfig& cfg, std::mt19937_64& rng);

struct TrainConfig {
  ProjectionConfig projection;
  InputEncoding input;
  LossConfig loss;
  AugmentConfig augment;
  double label_margin = 0.05;
  bool canonical_heading = true;  // regress vehicle boxes as away_heading(box)
  int iterations = 2000;
  double learning_rate = 1e-4;
  double momentum = 0.9;
  double lr_decay = 1.0;        // multiplied in every lr_step iterations
  int lr_step = 0;              // 0 keeps the rate constant
  double clip_norm = 300.0;      // global gradient norm cap, 0 disables
  double divergence_threshold = 1e6;
  std::uint64_t seed = 1;

  void validate() const;
  double learning_rate_at(int iteration) const;
};

/// The same box with yaw turned by pi when its heading points toward the
/// sensor. Box-shaped vehicles look identical from both ends, so this picks
/// the corner order from what the scan can show.
Box3D away_heading(const Box3D& box);

/// n-bar: mean labeled point count over all vehicles that have points.
double mean_vehicle_points(const std::vector<TrainingSample>& data, const ProjectionConfig& proj,
                           double margin);

/// Everything one iteration needs from a scan, before the network runs.
struct PreparedSample {
  PointMap map;
  LabelMap labels;
  SampleWeights weights;
  Tensor<float> input;
  bool usable = true;  // false when every labeled point is a vehicle point
};

PreparedSample prepare_sample(const TrainingSample& sample, const TrainConfig& cfg);

/// Fraction of loss-bearing cells whose argmax matches the label.
double objectness_accuracy(const Tensor<float>& objectness, const LabelMap& labels);

struct IterationStats {
  int iteration = 0;
  std::size_t sample = 0;
  double objectness = 0.0;
  double box = 0.0;
  double total = 0.0;
  double grad_norm = 0.0;
  double accuracy = 0.0;
};

/// Optimizer state carried across runs so a resumed run continues exactly.
struct TrainState {
  int iteration = 0;  // next iteration to run
  ParameterSet<float> velocity;
};

/// Runs iterations state.iteration .. cfg.iterations - 1. Each iteration draws
/// its sample and augmentation from a generator seeded by (seed, iteration).
/// Throws NumericError when the loss exceeds the divergence threshold.
void train(const std::vector<TrainingSample>& data, Network<float>& net, const TrainConfig& cfg,
           TrainState& state, const std::function<void(const IterationStats&)>& on_iteration = {});

/// CSV header and row of the loss log.
std::string loss_log_header();
std::string loss_log_row(const IterationStats& s);

}  // namespace lfcn
