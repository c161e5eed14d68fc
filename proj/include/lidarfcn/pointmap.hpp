#pragma once

#include "lidarfcn/common.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace lfcn {

enum class TagKind : std::uint8_t { Background, Vehicle, Ignore };

struct PointTag {
  TagKind kind = TagKind::Background;
  int vehicle_id = -1;  // valid only for TagKind::Vehicle

  static PointTag background() { return {}; }
  static PointTag vehicle(int id) { return {TagKind::Vehicle, id}; }
  static PointTag ignore() { return {TagKind::Ignore, -1}; }
  bool operator==(const PointTag&) const = default;
};

/// A range scan in the sensor frame (x forward, y left, z up), one tag per point.
struct RawScan {
  std::vector<Point3> points;
  std::vector<PointTag> tags;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  void push_back(const Point3& p, PointTag tag = {}) {
    points.push_back(p);
    tags.push_back(tag);
  }
  /// Throws DataError on size mismatch or non-finite coordinates.
  void validate() const;
};

/// Angular raster of the cylindrical projection. Rows index elevation and
/// columns index azimuth; indices are taken relative to (phi_min, theta_min).
struct ProjectionConfig {
  double delta_theta = deg2rad(0.2);
  double delta_phi = deg2rad(0.4);
  double theta_min = deg2rad(-44.8);
  double theta_max = deg2rad(44.8);
  double phi_min = deg2rad(-22.4);
  double phi_max = deg2rad(3.2);
  int rows = 64;
  int cols = 448;

  /// Builds a config with rows/cols derived from the angular window.
  static ProjectionConfig make(double delta_theta, double delta_phi, double theta_min,
                               double theta_max, double phi_min, double phi_max);
  /// Symmetric azimuth window of `cols` columns and an elevation window of
  /// `rows` rows starting at phi_min.
  static ProjectionConfig centered(int rows, int cols, double delta_theta, double delta_phi,
                                   double phi_min);

  /// Checks rows/cols against the window and divisibility by the network stride.
  void validate(int row_multiple = 8, int col_multiple = 16) const;
};

struct CellIndex {
  int row = 0;
  int col = 0;
  bool operator==(const CellIndex&) const = default;
};

/// Cell a point projects into, or nullopt when outside the window or at the origin.
std::optional<CellIndex> project_point(const Point3& p, const ProjectionConfig& cfg);

/// Unit direction through the center of a cell.
Point3 cell_ray(const ProjectionConfig& cfg, int row, int col);

struct PointMapCell {
  double d = 0.0;  // horizontal range sqrt(x^2 + y^2)
  double z = 0.0;
  double range = 0.0;
  bool occupied = false;
  std::int64_t source_index = -1;
  Point3 point = Point3::Zero();
};

class PointMap {
 public:
  PointMap() = default;
  PointMap(int rows, int cols) : rows_(rows), cols_(cols), cells_(std::size_t(rows) * cols) {}

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::size_t size() const { return cells_.size(); }

  PointMapCell& at(int row, int col) { return cells_[index(row, col)]; }
  const PointMapCell& at(int row, int col) const { return cells_[index(row, col)]; }
  const PointMapCell& operator[](std::size_t i) const { return cells_[i]; }
  PointMapCell& operator[](std::size_t i) { return cells_[i]; }
  std::size_t index(int row, int col) const { return std::size_t(row) * cols_ + col; }

  std::size_t occupied_count() const;

  std::size_t degenerate_points = 0;  // points at the origin, skipped
  std::size_t dropped_points = 0;     // points outside the angular window

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<PointMapCell> cells_;
};

/// Projects a scan into the (d, z) point map. When several points land in a
/// cell the one with the smallest range is kept; on exact ties the first wins.
PointMap project_scan(const RawScan& scan, const ProjectionConfig& cfg);

class RigidTransform {
 public:
  RigidTransform() = default;
  /// Throws ConfigError unless `rotation` is orthonormal with det +1 (1e-9).
  RigidTransform(const Mat3& rotation, const Point3& translation);

  static RigidTransform identity() { return {}; }
  static RigidTransform rot_z(double alpha, const Point3& translation = Point3::Zero());

  const Mat3& rotation() const { return rotation_; }
  const Point3& translation() const { return translation_; }
  Point3 apply(const Point3& p) const { return rotation_ * p + translation_; }

 private:
  Mat3 rotation_ = Mat3::Identity();
  Point3 translation_ = Point3::Zero();
};

RawScan apply_rigid_transform(const RawScan& scan, const RigidTransform& t);

}  // namespace lfcn
