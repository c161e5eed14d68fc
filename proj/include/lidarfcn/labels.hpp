#pragma once

#include "lidarfcn/boxcodec.hpp"
#include "lidarfcn/pointmap.hpp"
#include "lidarfcn/tensor.hpp"

#include <cstdint>
#include <vector>

namespace lfcn {

enum class BoxClass : std::uint8_t { Vehicle, Ignore };

struct LabeledBox {
  Box3D box;
  BoxClass cls = BoxClass::Vehicle;
};

struct CellLabel {
  std::int8_t label = 0;     // l_p: 1 on a vehicle, 0 otherwise
  bool ignore = false;       // excluded from both losses
  bool in_scan = false;      // the cell holds a point
  int vehicle = -1;          // index into the box list, vehicle cells only
  int vehicle_points = 0;    // n(p): occupied cells of the same vehicle
};

class LabelMap {
 public:
  LabelMap() = default;
  LabelMap(int rows, int cols)
      : rows_(rows), cols_(cols), cells_(std::size_t(rows) * cols), targets_(cells_.size()) {}

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::size_t size() const { return cells_.size(); }

  CellLabel& operator[](std::size_t i) { return cells_[i]; }
  const CellLabel& operator[](std::size_t i) const { return cells_[i]; }
  /// Encoded box target b'_p; meaningful on vehicle cells only.
  EncodedBox24& target(std::size_t i) { return targets_[i]; }
  const EncodedBox24& target(std::size_t i) const { return targets_[i]; }

  /// |P|: occupied, non-ignored cells.
  std::size_t num_points() const;
  /// |V|: vehicle cells.
  std::size_t num_vehicle_points() const;

  /// Labeled cell count per box (zero for ignore boxes and unseen vehicles).
  std::vector<int> points_per_box;

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<CellLabel> cells_;
  std::vector<EncodedBox24> targets_;
};

/// Labels every occupied cell from the box interiors (grown by `margin`).
/// Vehicle boxes win over ignore boxes; among vehicles the first listed wins.
LabelMap build_labels(const RawScan& scan, const std::vector<LabeledBox>& boxes,
                      const PointMap& map, double margin = 0.05);

struct LossConfig {
  double k = 4.0;
  double w_box = 0.05;
  double mean_vehicle_points = 1.0;  // n-bar, a dataset statistic

  void validate() const;
};

struct SampleWeights {
  std::vector<double> w1;
  std::vector<double> w2;
  std::size_t num_points = 0;          // |P|
  std::size_t num_vehicle_points = 0;  // |V|
  double negative_weight = 0.0;
};

/// w1 = k|V| / (|P| - |V|) on negatives and 1 on positives; w2 = n-bar / n(p)
/// on positives and 1 on negatives. Cells outside P get zero weights. When
/// |V| = 0 the negatives get k * n-bar / |P|. Throws ConfigError if every
/// point is a vehicle point.
SampleWeights sample_weights(const LabelMap& labels, const LossConfig& cfg);

/// Scaling of the (d, z) channels fed to the network.
struct InputEncoding {
  double d_scale = 0.05;
  double z_scale = 0.5;
};

/// (2, H, W) tensor of the scaled (d, z) channels; empty cells stay zero.
Tensor<float> encode_input(const PointMap& map, const InputEncoding& enc = {});

}  // namespace lfcn
