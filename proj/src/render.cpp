#include "lidarfcn/render.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace lfcn {

void Image::set(int x, int y, std::array<std::uint8_t, 3> c) {
  if (x < 0 || y < 0 || x >= width || y >= height) return;
  const std::size_t i = (std::size_t(y) * width + x) * 3;
  rgb[i] = c[0];
  rgb[i + 1] = c[1];
  rgb[i + 2] = c[2];
}

std::array<std::uint8_t, 3> Image::get(int x, int y) const {
  const std::size_t i = (std::size_t(y) * width + x) * 3;
  return {rgb[i], rgb[i + 1], rgb[i + 2]};
}

std::string encode_ppm(const Image& image) {
  std::string out = "P6\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
  out.append(reinterpret_cast<const char*>(image.rgb.data()), image.rgb.size());
  return out;
}

void write_ppm(const std::filesystem::path& path, const Image& image) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  const std::string bytes = encode_ppm(image);
  out.write(bytes.data(), std::streamsize(bytes.size()));
}

Image render_depth(const PointMap& map, double max_distance) {
  Image img(map.cols(), map.rows());
  for (int r = 0; r < map.rows(); ++r) {
    for (int c = 0; c < map.cols(); ++c) {
      const PointMapCell& cell = map.at(r, c);
      if (!cell.occupied) continue;
      const double t = std::clamp(cell.d / max_distance, 0.0, 1.0);
      const auto v = static_cast<std::uint8_t>(std::lround(255.0 - 254.0 * t));
      img.set(c, map.rows() - 1 - r, {v, v, v});
    }
  }
  return img;
}

Image render_confidence(const Tensor<float>& objectness, const PointMap& map) {
  if (objectness.shape() != std::vector<std::size_t>{2, std::size_t(map.rows()), std::size_t(map.cols())}) {
    throw ConfigError("objectness " + shape_string(objectness.shape()) + " does not match the point map");
  }
  Image img(map.cols(), map.rows());
  const std::size_t n = map.size();
  for (int r = 0; r < map.rows(); ++r) {
    for (int c = 0; c < map.cols(); ++c) {
      const std::size_t i = map.index(r, c);
      if (!map[i].occupied) {
        img.set(c, map.rows() - 1 - r, {24, 24, 24});
        continue;
      }
      const double p = 1.0 / (1.0 + std::exp(double(objectness[i]) - double(objectness[n + i])));
      const auto red = static_cast<std::uint8_t>(std::lround(255.0 * p));
      const auto rest = static_cast<std::uint8_t>(std::lround(96.0 * (1.0 - p)));
      img.set(c, map.rows() - 1 - r, {red, rest, rest});
    }
  }
  return img;
}

void draw_box(Image& image, const Box3D& box, const ProjectionConfig& proj,
              std::array<std::uint8_t, 3> color) {
  static constexpr int kEdges[12][2] = {{0, 1}, {1, 2}, {2, 3}, {3, 0}, {4, 5}, {5, 6},
                                        {6, 7}, {7, 4}, {0, 4}, {1, 5}, {2, 6}, {3, 7}};
  const CornerSet c = corners_from_params(box);
  for (const auto& e : kEdges) {
    const Point3 a = c[std::size_t(e[0])];
    const Point3 b = c[std::size_t(e[1])];
    const int steps = std::max(2, int(std::ceil((b - a).norm() / 0.02)));
    for (int s = 0; s <= steps; ++s) {
      const auto cell = project_point(a + (b - a) * (double(s) / steps), proj);
      if (cell) image.set(cell->col, proj.rows - 1 - cell->row, color);
    }
  }
}

}  // namespace lfcn
