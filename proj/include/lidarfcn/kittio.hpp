#pragma once

#include "lidarfcn/geometry.hpp"
#include "lidarfcn/pointmap.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace lfcn {

struct VelodynePoint {
  float x = 0.f;
  float y = 0.f;
  float z = 0.f;
  float reflectance = 0.f;
};

struct VelodyneFrame {
  std::vector<VelodynePoint> points;

  /// Untagged scan (every point background) in double precision.
  RawScan to_scan() const;
};

/// Little-endian float32 quadruples (x, y, z, reflectance).
VelodyneFrame read_velodyne(const std::filesystem::path& path);
VelodyneFrame parse_velodyne(const std::string& bytes);
void write_velodyne(const std::filesystem::path& path, const VelodyneFrame& frame);

struct KittiLabel {
  std::string type;
  double truncated = 0.0;
  int occluded = 0;
  double alpha = 0.0;
  Rect bbox;
  double height = 0.0;
  double width = 0.0;
  double length = 0.0;
  Point3 location = Point3::Zero();  // bottom center, rectified camera frame
  double rotation_y = 0.0;
  std::optional<double> score;       // detection files only

  bool is_dont_care() const { return type == "DontCare"; }
};

/// One object per line, 15 whitespace-separated fields (16 with a score).
std::vector<KittiLabel> parse_labels(const std::string& text);
std::vector<KittiLabel> read_labels(const std::filesystem::path& path);
std::string format_labels(const std::vector<KittiLabel>& labels);
void write_labels(const std::filesystem::path& path, const std::vector<KittiLabel>& labels);

enum class KittiCategory { Vehicle, Ignore, Background };

/// "Car" is a vehicle; "Van", "Truck" and "DontCare" are ignored; all else is background.
KittiCategory category_of(const std::string& type);

using Mat34 = Eigen::Matrix<double, 3, 4>;

struct Calibration {
  Mat34 P2 = Mat34::Zero();
  Mat3 R0_rect = Mat3::Identity();
  Mat34 Tr_velo_to_cam = Mat34::Zero();

  /// Camera at the lidar origin with the standard axis swap (camera x right,
  /// y down, z forward) and a KITTI-like pinhole.
  static Calibration synthetic();

  /// Throws DataError when the rotation parts are not orthonormal within 1e-3
  /// or the transforms are singular.
  void validate() const;
  Point3 velo_to_rect(const Point3& p) const;
  Point3 rect_to_velo(const Point3& p) const;
};

/// `KEY: v1 v2 ...` lines; P2, R0_rect and Tr_velo_to_cam are required.
Calibration parse_calib(const std::string& text);
Calibration read_calib(const std::filesystem::path& path);
std::string format_calib(const Calibration& calib);
void write_calib(const std::filesystem::path& path, const Calibration& calib);

/// Camera-frame label to a lidar-frame box: the bottom center is lifted by
/// h/2 along camera -y, mapped through R0_rect^-1 and Tr_velo_to_cam^-1. The
/// yaw is the ground heading whose rectified image projects onto
/// (cos ry, 0, -sin ry); with the standard axis swap, yaw = -rotation_y - pi/2.
Box3D label_to_lidar_box(const KittiLabel& label, const Calibration& calib);

/// Inverse of label_to_lidar_box. The image rectangle is the projected box
/// clipped to the image when `image_size` is given.
KittiLabel lidar_box_to_label(const Box3D& box, const Calibration& calib, const std::string& type,
                              std::optional<std::pair<double, double>> image_size = std::nullopt);

/// Minimal rectangle around the eight projected corners. Throws DataError when
/// a corner is less than 0.1 m in front of the camera.
Rect project_box_to_image(const Box3D& box, const Calibration& calib);

}  // namespace lfcn
