#include "lidarfcn/synth.hpp"

#include "lidarfcn/geometry.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

namespace lfcn {

void SceneConfig::validate() const {
  if (min_vehicles < 0 || max_vehicles < min_vehicles) throw ConfigError("bad vehicle count range");
  if (max_clutter < 0) throw ConfigError("clutter count must be >= 0");
  if (!(min_distance > 0.0) || !(max_distance > min_distance)) throw ConfigError("bad distance annulus");
  if (!(azimuth_max > azimuth_min)) throw ConfigError("bad azimuth range");
  if (!(length_min > 0.0) || length_max < length_min || !(width_min > 0.0) || width_max < width_min ||
      !(height_min > 0.0) || height_max < height_min) {
    throw ConfigError("bad vehicle dimension ranges");
  }
  if (min_gap < 0.0 || noise_std < 0.0) throw ConfigError("gap and noise must be >= 0");
  if (!(max_range > 0.0)) throw ConfigError("max range must be > 0");
  if (max_tries < 1) throw ConfigError("max_tries must be >= 1");
}

SceneConfig SceneConfig::with_window(const ProjectionConfig& proj) const {
  SceneConfig c = *this;
  c.azimuth_min = proj.theta_min;
  c.azimuth_max = proj.theta_max;
  return c;
}

std::uint64_t scene_seed(std::uint64_t seed, std::size_t index) {
  std::seed_seq seq{std::uint32_t(seed), std::uint32_t(seed >> 32), std::uint32_t(index),
                    std::uint32_t(std::uint64_t(index) >> 32)};
  std::uint32_t words[2];
  seq.generate(words, words + 2);
  return (std::uint64_t(words[0]) << 32) | words[1];
}

namespace {

struct Sampler {
  std::mt19937_64 rng;
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }
};

Box3D inflated(const Box3D& b, double gap) {
  Box3D out = b;
  out.length += gap;
  out.width += gap;
  return out;
}

bool fits(const Box3D& candidate, const std::vector<const Box3D*>& placed, double gap) {
  const Box3D a = inflated(candidate, gap);
  for (const Box3D* other : placed) {
    if (ground_intersection_area(a, inflated(*other, gap)) > 0.0) return false;
  }
  return true;
}

Box3D draw_pose(Sampler& s, const SceneConfig& cfg, double length, double width, double height) {
  const double r2 = s.uniform(cfg.min_distance * cfg.min_distance, cfg.max_distance * cfg.max_distance);
  const double r = std::sqrt(r2);
  const double az = s.uniform(cfg.azimuth_min, cfg.azimuth_max);
  Box3D b;
  b.length = length;
  b.width = width;
  b.height = height;
  b.center = Point3(r * std::cos(az), r * std::sin(az), cfg.z_ground + 0.5 * height);
  b.yaw = normalize_angle(s.uniform(-kPi, kPi));
  return b;
}

Box3D draw_clutter(Sampler& s, const SceneConfig& cfg) {
  switch (s.integer(0, 2)) {
    case 0: {  // pole
      const double side = s.uniform(0.2, 0.4);
      return draw_pose(s, cfg, side, side, s.uniform(2.0, 4.0));
    }
    case 1:  // wall
      return draw_pose(s, cfg, s.uniform(4.0, 12.0), s.uniform(0.2, 0.4), s.uniform(1.0, 2.5));
    default:  // bush
      return draw_pose(s, cfg, s.uniform(0.8, 2.0), s.uniform(0.8, 2.0), s.uniform(0.5, 1.2));
  }
}

}  // namespace

SceneSpec generate_scene(const SceneConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Sampler s{std::mt19937_64(seed)};
  SceneSpec scene;
  scene.seed = seed;
  scene.z_ground = cfg.z_ground;
  scene.noise_std = cfg.noise_std;
  scene.max_range = cfg.max_range;

  const int vehicles = s.integer(cfg.min_vehicles, cfg.max_vehicles);
  const int clutter = cfg.max_clutter > 0 ? s.integer(0, cfg.max_clutter) : 0;
  std::vector<const Box3D*> placed;
  scene.vehicles.reserve(std::size_t(vehicles));
  scene.clutter.reserve(std::size_t(clutter));

  for (int v = 0; v < vehicles; ++v) {
    int tries = 0;
    for (;; ++tries) {
      if (tries >= cfg.max_tries) {
        throw ConfigError("could not place vehicle " + std::to_string(v) + " after " +
                          std::to_string(cfg.max_tries) + " tries");
      }
      const double l = s.uniform(cfg.length_min, cfg.length_max);
      const double w = s.uniform(cfg.width_min, cfg.width_max);
      const double h = s.uniform(cfg.height_min, cfg.height_max);
      Box3D b = draw_pose(s, cfg, l, w, h);
      if (fits(b, placed, cfg.min_gap)) {
        scene.vehicles.push_back(b);
        placed.push_back(&scene.vehicles.back());
        break;
      }
    }
  }
  for (int c = 0; c < clutter; ++c) {
    int tries = 0;
    for (;; ++tries) {
      if (tries >= cfg.max_tries) {
        throw ConfigError("could not place clutter object " + std::to_string(c) + " after " +
                          std::to_string(cfg.max_tries) + " tries");
      }
      Box3D b = draw_clutter(s, cfg);
      if (fits(b, placed, cfg.min_gap)) {
        scene.clutter.push_back(b);
        placed.push_back(&scene.clutter.back());
        break;
      }
    }
  }
  return scene;
}

std::optional<double> ray_box_intersection(const Point3& dir, const Box3D& box) {
  const double c = std::cos(box.yaw);
  const double s = std::sin(box.yaw);
  // Ray origin and direction in the box frame.
  const Point3 o(-(c * box.center.x() + s * box.center.y()), -(-s * box.center.x() + c * box.center.y()),
                 -box.center.z());
  const Point3 d(c * dir.x() + s * dir.y(), -s * dir.x() + c * dir.y(), dir.z());
  const double half[3] = {0.5 * box.length, 0.5 * box.width, 0.5 * box.height};
  double t0 = 0.0;
  double t1 = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    if (std::abs(d[a]) < 1e-15) {
      if (std::abs(o[a]) > half[a]) return std::nullopt;
      continue;
    }
    double ta = (-half[a] - o[a]) / d[a];
    double tb = (half[a] - o[a]) / d[a];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    if (t0 > t1) return std::nullopt;
  }
  if (!(t0 > 0.0)) return std::nullopt;  // origin inside the box
  return t0;
}

RaycastResult raycast(const SceneSpec& scene, const ProjectionConfig& proj) {
  proj.validate(1, 1);
  RaycastResult out;
  out.visible_points.assign(scene.vehicles.size(), 0);
  out.unoccluded_points.assign(scene.vehicles.size(), 0);
  std::mt19937_64 rng(scene.seed ^ 0x9e3779b97f4a7c15ULL);
  std::normal_distribution<double> noise(0.0, 1.0);

  for (int row = 0; row < proj.rows; ++row) {
    for (int col = 0; col < proj.cols; ++col) {
      const Point3 dir = cell_ray(proj, row, col);
      double best = std::numeric_limits<double>::infinity();
      PointTag tag;
      if (dir.z() < 0.0) best = scene.z_ground / dir.z();
      for (std::size_t v = 0; v < scene.vehicles.size(); ++v) {
        const auto t = ray_box_intersection(dir, scene.vehicles[v]);
        if (!t) continue;
        if (*t <= scene.max_range) ++out.unoccluded_points[v];
        if (*t < best) {
          best = *t;
          tag = PointTag::vehicle(int(v));
        }
      }
      for (const auto& c : scene.clutter) {
        const auto t = ray_box_intersection(dir, c);
        if (t && *t < best) {
          best = *t;
          tag = PointTag::background();
        }
      }
      if (!(best <= scene.max_range)) continue;
      double range = best;
      if (scene.noise_std > 0.0) range = std::max(1e-3, range + scene.noise_std * noise(rng));
      out.scan.push_back(range * dir, tag);
      out.cells.push_back({row, col});
      if (tag.kind == TagKind::Vehicle) ++out.visible_points[std::size_t(tag.vehicle_id)];
    }
  }
  return out;
}

RawScan raycast_scan(const SceneSpec& scene, const ProjectionConfig& proj) {
  return raycast(scene, proj).scan;
}

std::vector<KittiLabel> scene_labels(const SceneSpec& scene, const RaycastResult& cast,
                                     const Calibration& calib, const SynthLabelConfig& cfg) {
  std::vector<KittiLabel> labels;
  for (std::size_t v = 0; v < scene.vehicles.size(); ++v) {
    const int visible = cast.visible_points[v];
    if (visible == 0) continue;
    const Box3D& box = scene.vehicles[v];
    KittiLabel l = lidar_box_to_label(box, calib, visible >= cfg.min_visible_points ? "Car" : "DontCare");
    try {
      const Rect full = project_box_to_image(box, calib);
      const Rect clipped = full.clipped(cfg.image_width, cfg.image_height);
      l.bbox = clipped;
      l.truncated = full.area() > 0.0 ? 1.0 - clipped.area() / full.area() : 1.0;
    } catch (const DataError&) {
      l.truncated = 1.0;
    }
    const double ratio = double(visible) / double(std::max(1, cast.unoccluded_points[v]));
    l.occluded = ratio >= 0.9 ? 0 : ratio >= 0.5 ? 1 : 2;
    labels.push_back(l);
  }
  return labels;
}

void write_dataset(const std::vector<SceneSpec>& scenes, const ProjectionConfig& proj,
                   const std::filesystem::path& dir, const SynthLabelConfig& cfg) {
  namespace fs = std::filesystem;
  std::error_code ec;
  for (const char* sub : {"velodyne", "label_2", "calib"}) {
    fs::create_directories(dir / sub, ec);
    if (ec) throw DataError("cannot create " + (dir / sub).string() + ": " + ec.message());
  }
  const Calibration calib = Calibration::synthetic();
  std::string manifest;
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    char id[16];
    std::snprintf(id, sizeof(id), "%06zu", i);
    const RaycastResult cast = raycast(scenes[i], proj);
    VelodyneFrame frame;
    frame.points.reserve(cast.scan.size());
    for (const auto& p : cast.scan.points) frame.points.push_back({float(p.x()), float(p.y()), float(p.z()), 0.f});
    write_velodyne(dir / "velodyne" / (std::string(id) + ".bin"), frame);
    write_labels(dir / "label_2" / (std::string(id) + ".txt"), scene_labels(scenes[i], cast, calib, cfg));
    write_calib(dir / "calib" / (std::string(id) + ".txt"), calib);
    manifest += std::string(id) + "\n";
  }
  std::ofstream out(dir / "manifest.txt", std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + (dir / "manifest.txt").string());
  out << manifest;
}

}  // namespace lfcn
