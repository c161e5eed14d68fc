#pragma once

#include "lidarfcn/boxcodec.hpp"
#include "lidarfcn/pointmap.hpp"
#include "lidarfcn/tensor.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace lfcn {

/// 8-bit RGB raster, row 0 at the top.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;

  Image() = default;
  Image(int w, int h) : width(w), height(h), rgb(std::size_t(w) * h * 3, 0) {}
  void set(int x, int y, std::array<std::uint8_t, 3> c);
  std::array<std::uint8_t, 3> get(int x, int y) const;
};

/// Binary PPM (P6).
std::string encode_ppm(const Image& image);
void write_ppm(const std::filesystem::path& path, const Image& image);

// Point-map renders are W x H; the top image row is the highest elevation row.

/// Gray level falls with d; empty cells stay black, occupied cells are never black.
Image render_depth(const PointMap& map, double max_distance = 80.0);

/// Vehicle probability of the objectness head: red intensity on occupied cells,
/// dark gray elsewhere.
Image render_confidence(const Tensor<float>& objectness, const PointMap& map);

/// Box edges drawn over `base` by projecting sampled edge points into the map.
void draw_box(Image& image, const Box3D& box, const ProjectionConfig& proj,
              std::array<std::uint8_t, 3> color);

}  // namespace lfcn
