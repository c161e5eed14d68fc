#include "lidarfcn/labels.hpp"

#include <spdlog/spdlog.h>

#include <cmath>

namespace lfcn {

std::size_t LabelMap::num_points() const {
  std::size_t n = 0;
  for (const auto& c : cells_) n += (c.in_scan && !c.ignore) ? 1 : 0;
  return n;
}

std::size_t LabelMap::num_vehicle_points() const {
  std::size_t n = 0;
  for (const auto& c : cells_) n += c.label == 1 ? 1 : 0;
  return n;
}

LabelMap build_labels(const RawScan& scan, const std::vector<LabeledBox>& boxes,
                      const PointMap& map, double margin) {
  for (const auto& b : boxes) b.box.validate();
  LabelMap labels(map.rows(), map.cols());
  labels.points_per_box.assign(boxes.size(), 0);

  for (std::size_t i = 0; i < map.size(); ++i) {
    const PointMapCell& cell = map[i];
    if (!cell.occupied) continue;
    if (cell.source_index < 0 || std::size_t(cell.source_index) >= scan.size()) {
      throw DataError("point map cell " + std::to_string(i) + " does not reference the scan");
    }
    const Point3& p = scan.points[std::size_t(cell.source_index)];
    CellLabel& lab = labels[i];
    lab.in_scan = true;
    int vehicle = -1;
    bool ignored = false;
    for (std::size_t b = 0; b < boxes.size(); ++b) {
      if (!boxes[b].box.contains(p, margin)) continue;
      if (boxes[b].cls == BoxClass::Vehicle) {
        vehicle = int(b);
        break;
      }
      ignored = true;
    }
    if (vehicle >= 0) {
      lab.label = 1;
      lab.vehicle = vehicle;
      labels.target(i) = encode_box(boxes[std::size_t(vehicle)].box, p);
      ++labels.points_per_box[std::size_t(vehicle)];
    } else if (ignored) {
      lab.ignore = true;
    }
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    CellLabel& lab = labels[i];
    if (lab.label == 1) lab.vehicle_points = labels.points_per_box[std::size_t(lab.vehicle)];
  }
  for (std::size_t b = 0; b < boxes.size(); ++b) {
    if (boxes[b].cls == BoxClass::Vehicle && labels.points_per_box[b] == 0) {
      spdlog::debug("vehicle box {} has no projected points; it contributes no labels", b);
    }
  }
  return labels;
}

void LossConfig::validate() const {
  if (!(k > 0.0)) throw ConfigError("loss k must be > 0");
  if (!(w_box >= 0.0)) throw ConfigError("loss w_box must be >= 0");
  if (!(mean_vehicle_points > 0.0)) throw ConfigError("mean vehicle point count must be > 0");
}

SampleWeights sample_weights(const LabelMap& labels, const LossConfig& cfg) {
  cfg.validate();
  SampleWeights w;
  w.num_points = labels.num_points();
  w.num_vehicle_points = labels.num_vehicle_points();
  const double P = double(w.num_points);
  const double V = double(w.num_vehicle_points);
  if (w.num_points > 0 && w.num_points == w.num_vehicle_points) {
    throw ConfigError("sample weights need at least one background point (|P| == |V|)");
  }
  if (w.num_vehicle_points > 0) {
    w.negative_weight = cfg.k * V / (P - V);
  } else if (w.num_points > 0) {
    w.negative_weight = cfg.k * cfg.mean_vehicle_points / P;
  }
  w.w1.assign(labels.size(), 0.0);
  w.w2.assign(labels.size(), 0.0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const CellLabel& c = labels[i];
    if (!c.in_scan || c.ignore) continue;
    if (c.label == 1) {
      w.w1[i] = 1.0;
      w.w2[i] = cfg.mean_vehicle_points / double(c.vehicle_points);
    } else {
      w.w1[i] = w.negative_weight;
      w.w2[i] = 1.0;
    }
  }
  return w;
}

Tensor<float> encode_input(const PointMap& map, const InputEncoding& enc) {
  Tensor<float> x({2, std::size_t(map.rows()), std::size_t(map.cols())});
  const std::size_t n = map.size();
  for (std::size_t i = 0; i < n; ++i) {
    const PointMapCell& c = map[i];
    x[i] = static_cast<float>(c.d * enc.d_scale);
    x[n + i] = static_cast<float>(c.z * enc.z_scale);
  }
  return x;
}

}  // namespace lfcn
