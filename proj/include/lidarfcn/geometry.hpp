#pragma once

#include "lidarfcn/boxcodec.hpp"

#include <array>
#include <vector>

namespace lfcn {

using Vec2 = Eigen::Vector2d;

/// Axis-aligned image rectangle in pixels.
struct Rect {
  double x1 = 0.0;
  double y1 = 0.0;
  double x2 = 0.0;
  double y2 = 0.0;

  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  double area() const { return (x2 > x1 && y2 > y1) ? (x2 - x1) * (y2 - y1) : 0.0; }
  Rect clipped(double w, double h) const;
};

/// Ground-plane footprint of a box, counterclockwise.
std::array<Vec2, 4> ground_footprint(const Box3D& box);

/// Shoelace area, positive for counterclockwise polygons.
double polygon_area(const std::vector<Vec2>& poly);

/// Sutherland-Hodgman clip of `subject` against a convex counterclockwise `clip`.
std::vector<Vec2> clip_convex(const std::vector<Vec2>& subject, const std::vector<Vec2>& clip);

double ground_intersection_area(const Box3D& a, const Box3D& b);

}  // namespace lfcn
