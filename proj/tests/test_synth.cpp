#include "support.hpp"

#include "lidarfcn/dataset.hpp"
#include "lidarfcn/evalkit.hpp"
#include "lidarfcn/labels.hpp"
#include "lidarfcn/synth.hpp"

#include <doctest.h>

using namespace lfcn;
namespace fs = std::filesystem;

namespace {

SceneConfig quiet_config() {
  SceneConfig c;
  c.noise_std = 0.0;
  return c;
}

Box3D car_at(double x, double y, double yaw = 0.0) {
  Box3D b;
  b.center = Point3(x, y, -1.7 + 0.75);
  b.length = 4.0;
  b.width = 1.8;
  b.height = 1.5;
  b.yaw = yaw;
  return b;
}

std::vector<std::string> all_files(const fs::path& dir) {
  std::vector<std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) out.push_back(fs::relative(e.path(), dir).string());
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

TEST_SUITE("synth") {
  TEST_CASE("zero vehicles gives an empty scene") {
    SceneConfig c;
    c.min_vehicles = 0;
    c.max_vehicles = 0;
    c.max_clutter = 0;
    const SceneSpec s = generate_scene(c, 5);
    CHECK(s.vehicles.empty());
    CHECK(s.clutter.empty());
  }

  TEST_CASE("fixed seed gives the same scene") {
    const SceneSpec a = generate_scene(SceneConfig{}, 77);
    const SceneSpec b = generate_scene(SceneConfig{}, 77);
    REQUIRE(a.vehicles.size() == b.vehicles.size());
    for (std::size_t i = 0; i < a.vehicles.size(); ++i) {
      CHECK(a.vehicles[i].center == b.vehicles[i].center);
      CHECK(a.vehicles[i].yaw == b.vehicles[i].yaw);
    }
    const auto ra = raycast_scan(a, ProjectionConfig{});
    const auto rb = raycast_scan(b, ProjectionConfig{});
    CHECK(ra.points == rb.points);
    CHECK(scene_seed(1, 0) != scene_seed(1, 1));
    CHECK(scene_seed(1, 0) != scene_seed(2, 0));
  }

  TEST_CASE("sampled vehicles respect the configured ranges") {
    const SceneConfig c;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      const SceneSpec s = generate_scene(c, seed);
      REQUIRE(int(s.vehicles.size()) >= c.min_vehicles);
      REQUIRE(int(s.vehicles.size()) <= c.max_vehicles);
      for (const auto& v : s.vehicles) {
        const double r = std::hypot(v.center.x(), v.center.y());
        REQUIRE(r >= c.min_distance);
        REQUIRE(r <= c.max_distance);
        REQUIRE(v.length >= c.length_min);
        REQUIRE(v.length <= c.length_max);
        REQUIRE(v.width >= c.width_min);
        REQUIRE(v.width <= c.width_max);
        REQUIRE(v.height >= c.height_min);
        REQUIRE(v.height <= c.height_max);
        REQUIRE(v.center.z() - 0.5 * v.height == doctest::Approx(c.z_ground));
      }
    }
  }

  TEST_CASE("100 scenes have no overlapping vehicles") {
    SceneConfig c;
    c.max_vehicles = 12;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      const SceneSpec s = generate_scene(c, seed);
      std::vector<Box3D> all = s.vehicles;
      all.insert(all.end(), s.clutter.begin(), s.clutter.end());
      for (std::size_t i = 0; i < all.size(); ++i) {
        for (std::size_t j = i + 1; j < all.size(); ++j) REQUIRE(ground_iou(all[i], all[j]) == 0.0);
      }
    }
  }

  TEST_CASE("placement gives up on an impossible scene") {
    SceneConfig c;
    c.min_vehicles = 50;
    c.max_vehicles = 50;
    c.min_distance = 5.0;
    c.max_distance = 6.0;
    c.max_tries = 50;
    CHECK_THROWS_AS(generate_scene(c, 1), ConfigError);
    c.max_distance = 4.0;
    CHECK_THROWS_AS(generate_scene(c, 1), ConfigError);
  }

  TEST_CASE("ray and box") {
    Box3D b;
    b.center = Point3(10, 0, 0);
    b.length = 2.0;
    b.width = 1.0;
    b.height = 1.0;
    const auto t = ray_box_intersection({1, 0, 0}, b);
    REQUIRE(t.has_value());
    CHECK(*t == doctest::Approx(9.0));
    CHECK_FALSE(ray_box_intersection({-1, 0, 0}, b).has_value());
    CHECK_FALSE(ray_box_intersection({0, 1, 0}, b).has_value());
    b.yaw = kPi / 2;  // now 1 m deep along x
    CHECK(*ray_box_intersection({1, 0, 0}, b) == doctest::Approx(9.5));
    b.center = Point3::Zero();
    CHECK_FALSE(ray_box_intersection({1, 0, 0}, b).has_value());
  }

  TEST_CASE("empty scene hits the ground at 1.7 / sin(-phi)") {
    SceneSpec s;
    s.z_ground = -1.7;
    s.max_range = 1e9;  // the rows just below the horizon reach far
    const ProjectionConfig proj;
    const RaycastResult r = raycast(s, proj);
    std::size_t downward = 0;
    for (int row = 0; row < proj.rows; ++row) {
      for (int col = 0; col < proj.cols; ++col) downward += cell_ray(proj, row, col).z() < 0.0 ? 1 : 0;
    }
    CHECK(r.scan.size() == downward);
    for (std::size_t i = 0; i < r.scan.size(); ++i) {
      const double phi = proj.phi_min + (r.cells[i].row + 0.5) * proj.delta_phi;
      REQUIRE(phi < 0.0);
      REQUIRE(r.scan.points[i].norm() == doctest::Approx(1.7 / std::sin(-phi)).epsilon(1e-12));
      REQUIRE(r.scan.points[i].z() == doctest::Approx(-1.7).epsilon(1e-12));
      REQUIRE(r.scan.tags[i] == PointTag::background());
    }
  }

  TEST_CASE("noise-free points project back to their cells") {
    SceneConfig c = quiet_config();
    const ProjectionConfig proj;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const RaycastResult r = raycast(generate_scene(c, seed), proj);
      const PointMap map = project_scan(r.scan, proj);
      REQUIRE(map.occupied_count() == r.scan.size());
      for (std::size_t i = 0; i < r.scan.size(); ++i) {
        const auto& cell = map.at(r.cells[i].row, r.cells[i].col);
        REQUIRE(cell.occupied);
        REQUIRE(cell.source_index == i);
      }
    }
  }

  TEST_CASE("noise moves points along their ray only") {
    SceneConfig c;
    c.noise_std = 0.05;
    const ProjectionConfig proj;
    const SceneSpec s = generate_scene(c, 8);
    SceneSpec quiet = s;
    quiet.noise_std = 0.0;
    const RaycastResult noisy = raycast(s, proj);
    const RaycastResult clean = raycast(quiet, proj);
    REQUIRE(noisy.scan.size() == clean.scan.size());
    double moved = 0.0;
    for (std::size_t i = 0; i < noisy.scan.size(); ++i) {
      const Point3 a = noisy.scan.points[i], b = clean.scan.points[i];
      REQUIRE((a.normalized() - b.normalized()).norm() < 1e-9);
      moved = std::max(moved, std::abs(a.norm() - b.norm()));
    }
    CHECK(moved > 0.0);
  }

  TEST_CASE("noise-free labels mark exactly the vehicle hits") {
    const ProjectionConfig proj;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const SceneSpec s = generate_scene(quiet_config(), seed);
      const RaycastResult r = raycast(s, proj);
      std::vector<LabeledBox> boxes;
      for (const auto& v : s.vehicles) boxes.push_back({v, BoxClass::Vehicle});
      const PointMap map = project_scan(r.scan, proj);
      const LabelMap labels = build_labels(r.scan, boxes, map, 1e-6);
      std::size_t vehicle_cells = 0;
      for (std::size_t i = 0; i < r.scan.size(); ++i) {
        const std::size_t idx = map.index(r.cells[i].row, r.cells[i].col);
        const bool hit = r.scan.tags[i].kind == TagKind::Vehicle;
        REQUIRE(labels[idx].label == (hit ? 1 : 0));
        if (hit) REQUIRE(labels[idx].vehicle == r.scan.tags[i].vehicle_id);
        vehicle_cells += hit ? 1 : 0;
      }
      std::size_t marked = 0;
      for (std::size_t i = 0; i < labels.size(); ++i) marked += labels[i].label == 1 ? 1 : 0;
      CHECK(marked == vehicle_cells);
    }
  }

  TEST_CASE("a box hidden behind another gets no points") {
    SceneSpec s;
    s.vehicles.push_back(car_at(10, 0, kPi / 2));
    Box3D hidden = car_at(25, 0);
    hidden.length = 1.0;
    hidden.width = 1.0;
    hidden.height = 1.0;
    hidden.center.z() = -1.7 + 0.5;
    s.vehicles.push_back(hidden);
    const RaycastResult r = raycast(s, ProjectionConfig{});
    CHECK(r.visible_points[0] > 0);
    CHECK(r.visible_points[1] == 0);
    CHECK(r.unoccluded_points[1] > 0);
    CHECK(r.unoccluded_points[0] == r.visible_points[0]);
    for (const auto& t : r.scan.tags) CHECK(t.vehicle_id != 1);
    CHECK(scene_labels(s, r, Calibration::synthetic()).size() == 1);
  }

  TEST_CASE("written datasets read back") {
    testing::TempDir dir("synth");
    const ProjectionConfig proj;
    std::vector<SceneSpec> scenes;
    for (std::size_t i = 0; i < 4; ++i) scenes.push_back(generate_scene(SceneConfig{}, scene_seed(3, i)));
    SceneSpec empty;
    scenes.push_back(empty);
    write_dataset(scenes, proj, dir.path());

    const auto ids = list_frames(dir.path());
    REQUIRE(ids.size() == scenes.size());
    CHECK(testing::slurp(dir / "manifest.txt") == "000000\n000001\n000002\n000003\n000004\n");
    CHECK(testing::slurp(dir / "label_2/000004.txt").empty());
    for (std::size_t i = 0; i < scenes.size(); ++i) {
      const Frame f = load_frame(dir.path(), ids[i]);
      const RaycastResult r = raycast(scenes[i], proj);
      REQUIRE(f.scan.size() == r.scan.size());
      for (std::size_t k = 0; k < f.scan.size(); ++k) {
        REQUIRE((f.scan.points[k] - r.scan.points[k]).norm() < 1e-4);
      }
      std::size_t next = 0;
      for (std::size_t v = 0; v < scenes[i].vehicles.size(); ++v) {
        if (r.visible_points[v] == 0) continue;
        REQUIRE(next < f.labels.size());
        const auto& l = f.labels[next++];
        CHECK(l.type == (r.visible_points[v] >= 10 ? "Car" : "DontCare"));
        const auto box = label_box(l, f.calib);
        REQUIRE(box.has_value());
        const Box3D& truth = scenes[i].vehicles[v];
        CHECK((box->center - truth.center).norm() < 1e-5);
        CHECK(std::abs(normalize_angle(box->yaw - truth.yaw)) < 1e-5);
        CHECK(std::abs(box->length - truth.length) < 1e-5);
        CHECK(std::abs(box->width - truth.width) < 1e-5);
        CHECK(std::abs(box->height - truth.height) < 1e-5);
      }
      CHECK(next == f.labels.size());
    }
  }

  TEST_CASE("same seed writes the same bytes") {
    testing::TempDir a("synth_a"), b("synth_b");
    const auto cfg = testing::toy_config();
    testing::write_synthetic(cfg, 3, 9, a.path());
    testing::write_synthetic(cfg, 3, 9, b.path());
    const auto files = all_files(a.path());
    REQUIRE(files == all_files(b.path()));
    CHECK(files.size() == 10);
    for (const auto& f : files) CHECK(testing::slurp(a / f) == testing::slurp(b / f));
  }

  TEST_CASE("occlusion levels follow the visible fraction") {
    SceneSpec s;
    s.vehicles.push_back(car_at(10, 0, kPi / 2));
    s.vehicles.push_back(car_at(20, 1.5, kPi / 2));
    const RaycastResult r = raycast(s, ProjectionConfig{});
    const auto labels = scene_labels(s, r, Calibration::synthetic());
    REQUIRE(labels.size() == 2);
    CHECK(labels[0].occluded == 0);
    const double ratio = double(r.visible_points[1]) / r.unoccluded_points[1];
    CHECK(ratio < 0.9);
    CHECK(labels[1].occluded == (ratio >= 0.5 ? 1 : 2));
  }
}
