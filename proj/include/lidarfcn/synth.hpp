#pragma once

#include "lidarfcn/boxcodec.hpp"
#include "lidarfcn/kittio.hpp"
#include "lidarfcn/pointmap.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <vector>

namespace lfcn {

struct SceneConfig {
  int min_vehicles = 1;
  int max_vehicles = 6;
  double min_distance = 5.0;   // annulus of vehicle centers, meters
  double max_distance = 60.0;
  double azimuth_min = deg2rad(-44.8);
  double azimuth_max = deg2rad(44.8);
  double length_min = 3.5, length_max = 5.0;
  double width_min = 1.6, width_max = 2.0;
  double height_min = 1.4, height_max = 1.8;
  double min_gap = 0.5;        // free space kept between footprints
  int max_clutter = 3;         // poles, walls and bushes tagged background
  double z_ground = -1.7;
  double noise_std = 0.01;
  double max_range = 120.0;
  int max_tries = 1000;

  void validate() const;
  /// Azimuth bounds copied from the projection window.
  SceneConfig with_window(const ProjectionConfig& proj) const;
};

struct SceneSpec {
  std::vector<Box3D> vehicles;  // vehicle id = index
  std::vector<Box3D> clutter;
  double z_ground = -1.7;
  double noise_std = 0.0;
  double max_range = 120.0;
  std::uint64_t seed = 0;
};

/// Places vehicles on the ground with uniform area density in the annulus and
/// uniform yaw, rejecting placements whose inflated footprints intersect.
/// Throws ConfigError when an object cannot be placed within max_tries draws.
SceneSpec generate_scene(const SceneConfig& cfg, std::uint64_t seed);

/// Distance along a ray from the origin to the entry point of a box, if any.
std::optional<double> ray_box_intersection(const Point3& dir, const Box3D& box);

struct RaycastResult {
  RawScan scan;
  std::vector<int> visible_points;      // per vehicle, nearest-hit rays
  std::vector<int> unoccluded_points;   // per vehicle, rays that would hit it alone
  std::vector<CellIndex> cells;         // originating cell per point
};

/// One ray per cell center; the nearest hit among vehicles, clutter and the
/// ground plane emits a point. Range noise moves points along their ray.
RaycastResult raycast(const SceneSpec& scene, const ProjectionConfig& proj);
RawScan raycast_scan(const SceneSpec& scene, const ProjectionConfig& proj);

struct SynthLabelConfig {
  int min_visible_points = 10;   // fewer visible points are written as DontCare
  double image_width = 1242.0;
  double image_height = 375.0;
};

/// KITTI labels of the visible vehicles. Vehicles without points are left out.
std::vector<KittiLabel> scene_labels(const SceneSpec& scene, const RaycastResult& cast,
                                     const Calibration& calib, const SynthLabelConfig& cfg = {});

/// Seed of scene `index` in a dataset drawn with `seed`.
std::uint64_t scene_seed(std::uint64_t seed, std::size_t index);

/// Writes velodyne/, label_2/ and calib/ files named 000000, 000001, ...
/// plus manifest.txt with one frame id per line.
void write_dataset(const std::vector<SceneSpec>& scenes, const ProjectionConfig& proj,
                   const std::filesystem::path& dir, const SynthLabelConfig& cfg = {});

}  // namespace lfcn
