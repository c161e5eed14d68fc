#pragma once

// Shared fixtures and independent reference implementations for the tests.

#include "lidarfcn/boxcodec.hpp"
#include "lidarfcn/config.hpp"
#include "lidarfcn/detector.hpp"
#include "lidarfcn/pipeline.hpp"
#include "lidarfcn/pointmap.hpp"
#include "lidarfcn/synth.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <tuple>
#include <string>
#include <vector>

#include <unistd.h>

namespace testing {

using lfcn::Box3D;
using lfcn::Point3;

struct Rng {
  std::mt19937_64 gen;
  explicit Rng(std::uint64_t seed) : gen(seed) {}
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(gen); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(gen); }
  Point3 point(double lo, double hi) { return {uniform(lo, hi), uniform(lo, hi), uniform(lo, hi)}; }
};

inline Box3D random_box(Rng& r, double reach = 30.0) {
  Box3D b;
  b.center = Point3(r.uniform(-reach, reach), r.uniform(-reach, reach), r.uniform(-2.0, 1.0));
  b.length = r.uniform(0.5, 6.0);
  b.width = r.uniform(0.5, 3.0);
  b.height = r.uniform(0.5, 3.0);
  b.yaw = r.uniform(-lfcn::kPi, lfcn::kPi);
  return b;
}

/// A point at least 1 m from the sensor.
inline Point3 random_anchor(Rng& r, double reach = 40.0) {
  for (;;) {
    Point3 p = r.point(-reach, reach);
    if (p.norm() > 1.0) return p;
  }
}

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("lidarfcn_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

inline void spit(const std::filesystem::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << bytes;
}

/// 32 x 128 map and 8/16/32 channels.
inline constexpr const char* kToyConfig =
    "projection.rows = 32\n"
    "projection.cols = 128\n"
    "projection.delta_theta_deg = 0.4\n"
    "projection.delta_phi_deg = 0.8\n"
    "projection.phi_min_deg = -23.2\n"
    "net.conv1 = 8\n"
    "net.conv2 = 16\n"
    "net.conv3 = 32\n"
    "net.deconv4 = 16\n"
    "net.deconv5 = 8\n";

inline lfcn::RunConfig toy_config() {
  lfcn::RunConfig cfg;
  cfg.merge_text(kToyConfig, "toy");
  return cfg;
}

/// Writes `count` scenes drawn with `seed` under the config's projection.
inline void write_synthetic(const lfcn::RunConfig& cfg, int count, std::uint64_t seed,
                            const std::filesystem::path& dir) {
  std::vector<lfcn::SceneSpec> scenes;
  for (int i = 0; i < count; ++i) {
    scenes.push_back(lfcn::generate_scene(cfg.scene(), lfcn::scene_seed(seed, std::size_t(i))));
  }
  lfcn::write_dataset(scenes, cfg.projection(), dir, cfg.synth_labels());
}

// ---- oracles ---------------------------------------------------------------

/// Cell from the defining formulas in long double, no snapping.
inline std::optional<lfcn::CellIndex> oracle_cell(const Point3& p, const lfcn::ProjectionConfig& cfg) {
  const long double x = p.x(), y = p.y(), z = p.z();
  const long double r = std::sqrt(x * x + y * y + z * z);
  if (r == 0) return std::nullopt;
  const long double theta = std::atan2(y, x);
  const long double phi = std::asin(z / r);
  const long double row = std::floor((phi - cfg.phi_min) / cfg.delta_phi);
  const long double col = std::floor((theta - cfg.theta_min) / cfg.delta_theta);
  if (row < 0 || col < 0 || row >= cfg.rows || col >= cfg.cols) return std::nullopt;
  return lfcn::CellIndex{int(row), int(col)};
}

/// Rz(theta) Ry(-phi) from Eigen angle-axis rotations.
inline lfcn::Mat3 oracle_basis(const Point3& p) {
  const double theta = std::atan2(p.y(), p.x());
  const double phi = std::asin(p.z() / p.norm());
  return (Eigen::AngleAxisd(theta, Eigen::Vector3d::UnitZ()) * Eigen::AngleAxisd(-phi, Eigen::Vector3d::UnitY()))
      .toRotationMatrix();
}

/// Corners built from the box's local axes, in the documented canonical order.
inline lfcn::CornerSet oracle_corners(const Box3D& b) {
  const Point3 ax(std::cos(b.yaw), std::sin(b.yaw), 0.0);
  const Point3 ay(-std::sin(b.yaw), std::cos(b.yaw), 0.0);
  const Point3 az(0.0, 0.0, 1.0);
  const int sx[4] = {1, -1, -1, 1};
  const int sy[4] = {1, 1, -1, -1};
  lfcn::CornerSet out;
  for (int face = 0; face < 2; ++face) {
    for (int k = 0; k < 4; ++k) {
      out[std::size_t(4 * face + k)] = b.center + 0.5 * sx[k] * b.length * ax + 0.5 * sy[k] * b.width * ay +
                                       (face == 0 ? -0.5 : 0.5) * b.height * az;
    }
  }
  return out;
}

inline lfcn::EncodedBox24 oracle_encode(const Box3D& b, const Point3& p) {
  const lfcn::Mat3 rt = oracle_basis(p).transpose();
  const lfcn::CornerSet c = oracle_corners(b);
  lfcn::EncodedBox24 out;
  for (std::size_t i = 0; i < 8; ++i) {
    const Point3 e = rt * (c[i] - p);
    for (int k = 0; k < 3; ++k) out[3 * i + std::size_t(k)] = e[k];
  }
  return out;
}

inline double max_abs_diff(const lfcn::EncodedBox24& a, const lfcn::EncodedBox24& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < 24; ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

inline double max_corner_error(const lfcn::CornerSet& a, const lfcn::CornerSet& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < 8; ++i) m = std::max(m, (a[i] - b[i]).norm());
  return m;
}

/// Point-in-box written out in the box frame.
inline bool oracle_inside(const Box3D& b, const Point3& p, double margin) {
  const Point3 d = p - b.center;
  const double c = std::cos(b.yaw), s = std::sin(b.yaw);
  const double lx = c * d.x() + s * d.y();
  const double ly = -s * d.x() + c * d.y();
  return std::abs(lx) <= 0.5 * b.length + margin && std::abs(ly) <= 0.5 * b.width + margin &&
         std::abs(d.z()) <= 0.5 * b.height + margin;
}

/// Neighbor-count suppression recomputed from scratch every round: scores are
/// counted over the surviving set in the 24-d corner space (self included).
/// `remaining` receives the candidates left unconsumed.
inline std::vector<lfcn::Detection> brute_force_nms(const std::vector<lfcn::Candidate>& cands,
                                                    const lfcn::NmsConfig& cfg,
                                                    std::vector<bool>* remaining = nullptr) {
  const std::size_t n = cands.size();
  std::vector<bool> alive(n, true);
  auto dist2 = [&](std::size_t i, std::size_t j) {
    double s = 0.0;
    for (std::size_t k = 0; k < 24; ++k) {
      const double d = cands[i].corners[k] - cands[j].corners[k];
      s += d * d;
    }
    return s;
  };
  std::vector<lfcn::Detection> out;
  for (;;) {
    std::vector<int> score(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
      if (!alive[i]) continue;
      for (std::size_t j = 0; j < n; ++j) {
        if (alive[j] && dist2(i, j) < cfg.delta * cfg.delta) ++score[i];
      }
    }
    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < n; ++i) {
      if (!alive[i]) continue;
      if (!best) {
        best = i;
        continue;
      }
      const auto& a = cands[i];
      const auto& b = cands[*best];
      const auto key_a = std::make_tuple(-score[i], a.cell.row, a.cell.col, i);
      const auto key_b = std::make_tuple(-score[*best], b.cell.row, b.cell.col, *best);
      if (key_a < key_b) best = i;
    }
    if (!best || score[*best] < cfg.min_score) {
      if (remaining) *remaining = alive;
      break;
    }
    Box3D box;
    try {
      box = lfcn::params_from_corners(lfcn::unflatten(cands[*best].corners), cfg.max_fit_residual);
    } catch (const lfcn::NumericError&) {
      alive[*best] = false;
      continue;
    }
    lfcn::Detection d;
    d.box = box;
    d.score = score[*best];
    d.cell = cands[*best].cell;
    double prob = 0.0;
    std::size_t used = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (!alive[j]) continue;
      if (j == *best || oracle_inside(box, cands[j].point, cfg.margin)) {
        prob += cands[j].probability;
        ++used;
        alive[j] = false;
      }
    }
    d.consumed = used;
    d.confidence = prob / double(used);
    out.push_back(d);
  }
  return out;
}

/// Ground-footprint intersection area of two boxes by jittered stratified
/// sampling over a's footprint (n x n strata).
inline double sampled_overlap(const Box3D& a, const Box3D& b, int n, Rng& r) {
  const double ca = std::cos(a.yaw), sa = std::sin(a.yaw);
  const double cb = std::cos(b.yaw), sb = std::sin(b.yaw);
  long hits = 0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double u = ((i + r.uniform(0.0, 1.0)) / n - 0.5) * a.length;
      const double v = ((j + r.uniform(0.0, 1.0)) / n - 0.5) * a.width;
      const double x = a.center.x() + ca * u - sa * v - b.center.x();
      const double y = a.center.y() + sa * u + ca * v - b.center.y();
      const double lx = cb * x + sb * y;
      const double ly = -sb * x + cb * y;
      hits += (std::abs(lx) <= 0.5 * b.length && std::abs(ly) <= 0.5 * b.width) ? 1 : 0;
    }
  }
  return a.length * a.width * double(hits) / (double(n) * n);
}

}  // namespace testing
