#include "lidarfcn/pointmap.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <string>

namespace lfcn {

double normalize_angle(double a) {
  a = std::remainder(a, 2.0 * kPi);  // [-pi, pi]
  if (a <= -kPi) a += 2.0 * kPi;
  return a;
}

void RawScan::validate() const {
  if (points.size() != tags.size()) {
    throw DataError("scan has " + std::to_string(points.size()) + " points but " +
                    std::to_string(tags.size()) + " tags");
  }
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!points[i].allFinite()) throw DataError("scan point " + std::to_string(i) + " is not finite");
  }
}

namespace {

// Cell boundaries snap within this many cells so that windows expressed in
// degrees land on whole indices despite radian round-off.
constexpr double kSnap = 1e-9;

int window_cells(double extent, double step) {
  return static_cast<int>(std::ceil(extent / step - kSnap));
}

int cell_of(double angle, double lo, double step) {
  return static_cast<int>(std::floor((angle - lo) / step + kSnap));
}

}  // namespace

ProjectionConfig ProjectionConfig::make(double delta_theta, double delta_phi, double theta_min,
                                        double theta_max, double phi_min, double phi_max) {
  ProjectionConfig cfg;
  cfg.delta_theta = delta_theta;
  cfg.delta_phi = delta_phi;
  cfg.theta_min = theta_min;
  cfg.theta_max = theta_max;
  cfg.phi_min = phi_min;
  cfg.phi_max = phi_max;
  if (!(delta_theta > 0.0) || !(delta_phi > 0.0) || !(theta_max > theta_min) ||
      !(phi_max > phi_min)) {
    throw ConfigError("projection window must have positive resolution and extent");
  }
  cfg.rows = window_cells(phi_max - phi_min, delta_phi);
  cfg.cols = window_cells(theta_max - theta_min, delta_theta);
  return cfg;
}

ProjectionConfig ProjectionConfig::centered(int rows, int cols, double delta_theta,
                                            double delta_phi, double phi_min) {
  const double half = 0.5 * cols * delta_theta;
  return make(delta_theta, delta_phi, -half, half, phi_min, phi_min + rows * delta_phi);
}

void ProjectionConfig::validate(int row_multiple, int col_multiple) const {
  if (!(delta_theta > 0.0) || !(delta_phi > 0.0)) {
    throw ConfigError("projection resolution must be positive");
  }
  if (!(theta_max > theta_min) || !(phi_max > phi_min)) {
    throw ConfigError("projection window is empty");
  }
  if (theta_min < -kPi - 1e-12 || theta_max > kPi + 1e-12 || phi_min < -kPi / 2 - 1e-12 ||
      phi_max > kPi / 2 + 1e-12) {
    throw ConfigError("projection window exceeds the sphere");
  }
  const int want_rows = window_cells(phi_max - phi_min, delta_phi);
  const int want_cols = window_cells(theta_max - theta_min, delta_theta);
  if (rows != want_rows || cols != want_cols) {
    throw ConfigError("projection grid " + std::to_string(rows) + "x" + std::to_string(cols) +
                      " does not match window (expected " + std::to_string(want_rows) + "x" +
                      std::to_string(want_cols) + ")");
  }
  if (rows % row_multiple != 0 || cols % col_multiple != 0) {
    throw ConfigError("projection grid " + std::to_string(rows) + "x" + std::to_string(cols) +
                      " must be divisible by " + std::to_string(row_multiple) + "x" +
                      std::to_string(col_multiple));
  }
}

std::optional<CellIndex> project_point(const Point3& p, const ProjectionConfig& cfg) {
  const double range = p.norm();
  if (!(range > 0.0)) return std::nullopt;
  const double theta = std::atan2(p.y(), p.x());
  const double phi = std::asin(std::clamp(p.z() / range, -1.0, 1.0));
  const int row = cell_of(phi, cfg.phi_min, cfg.delta_phi);
  const int col = cell_of(theta, cfg.theta_min, cfg.delta_theta);
  if (row < 0 || row >= cfg.rows || col < 0 || col >= cfg.cols) return std::nullopt;
  return CellIndex{row, col};
}

Point3 cell_ray(const ProjectionConfig& cfg, int row, int col) {
  if (row < 0 || row >= cfg.rows || col < 0 || col >= cfg.cols) {
    throw ConfigError("cell (" + std::to_string(row) + ", " + std::to_string(col) +
                      ") outside the point map");
  }
  const double theta = cfg.theta_min + (col + 0.5) * cfg.delta_theta;
  const double phi = cfg.phi_min + (row + 0.5) * cfg.delta_phi;
  return {std::cos(phi) * std::cos(theta), std::cos(phi) * std::sin(theta), std::sin(phi)};
}

std::size_t PointMap::occupied_count() const {
  std::size_t n = 0;
  for (const auto& c : cells_) n += c.occupied ? 1 : 0;
  return n;
}

PointMap project_scan(const RawScan& scan, const ProjectionConfig& cfg) {
  if (scan.empty()) throw DataError("cannot project an empty scan");
  PointMap map(cfg.rows, cfg.cols);
  for (std::size_t i = 0; i < scan.points.size(); ++i) {
    const Point3& p = scan.points[i];
    const double range = p.norm();
    if (!(range > 0.0)) {
      ++map.degenerate_points;
      continue;
    }
    const auto cell = project_point(p, cfg);
    if (!cell) {
      ++map.dropped_points;
      continue;
    }
    PointMapCell& c = map.at(cell->row, cell->col);
    if (c.occupied && c.range <= range) continue;
    c.occupied = true;
    c.range = range;
    c.d = std::hypot(p.x(), p.y());
    c.z = p.z();
    c.source_index = static_cast<std::int64_t>(i);
    c.point = p;
  }
  return map;
}

RigidTransform::RigidTransform(const Mat3& rotation, const Point3& translation)
    : rotation_(rotation), translation_(translation) {
  const double ortho = (rotation.transpose() * rotation - Mat3::Identity()).cwiseAbs().maxCoeff();
  const double det = rotation.determinant();
  if (!(ortho <= 1e-9) || !(std::abs(det - 1.0) <= 1e-9)) {
    throw ConfigError("rigid transform rotation is not orthonormal with det +1 (residual " +
                      std::to_string(ortho) + ", det " + std::to_string(det) + ")");
  }
  if (!translation.allFinite()) throw ConfigError("rigid transform translation is not finite");
}

RigidTransform RigidTransform::rot_z(double alpha, const Point3& translation) {
  const double c = std::cos(alpha);
  const double s = std::sin(alpha);
  Mat3 r;
  r << c, -s, 0, s, c, 0, 0, 0, 1;
  return RigidTransform(r, translation);
}

RawScan apply_rigid_transform(const RawScan& scan, const RigidTransform& t) {
  RawScan out;
  out.tags = scan.tags;
  out.points.reserve(scan.points.size());
  for (const auto& p : scan.points) out.points.push_back(t.apply(p));
  return out;
}

}  // namespace lfcn
