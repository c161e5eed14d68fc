#pragma once

#include "lidarfcn/common.hpp"

#include <array>

namespace lfcn {

/// Oriented 3D box: extents along the box-local axes, yaw about global z.
struct Box3D {
  Point3 center = Point3::Zero();
  double length = 1.0;  // box-local x
  double width = 1.0;   // box-local y
  double height = 1.0;  // box-local z
  double yaw = 0.0;

  /// Throws ConfigError on non-positive or non-finite extents.
  void validate() const;
  /// True when `p` lies inside the box grown by `margin` on every face.
  bool contains(const Point3& p, double margin = 0.0) const;
};

/// Box corners in canonical order. The bottom face is listed counterclockwise
/// seen from above starting at box-local (+x, +y): (+,+), (-,+), (-,-), (+,-);
/// the top face follows in the same order.
using CornerSet = std::array<Point3, 8>;

/// The 24 numbers (c'_1, ..., c'_8) of a box expressed in an anchor point's
/// observation frame.
using EncodedBox24 = std::array<double, 24>;

CornerSet corners_from_params(const Box3D& box);

/// Least-squares box fit to a corner set. Throws NumericError when the corners
/// deviate from the fitted box by more than `max_residual` meters.
Box3D params_from_corners(const CornerSet& corners, double max_residual = 0.5);

/// Rotation whose first column points from the sensor origin to `p` and whose
/// second column is horizontal: R = Rz(theta) * Ry(-phi) in the right-handed
/// convention, with theta the azimuth and phi the elevation of `p`.
struct ObservationBasis {
  Mat3 rotation;

  Point3 r_x() const { return rotation.col(0); }
  Point3 r_y() const { return rotation.col(1); }
  Point3 r_z() const { return rotation.col(2); }
};

/// Throws ConfigError when `p` is the origin.
ObservationBasis observation_basis(const Point3& p);

/// Each canonical corner c becomes R^T (c - p).
EncodedBox24 encode_corners(const CornerSet& corners, const Point3& p);
EncodedBox24 encode_box(const Box3D& box, const Point3& p);
CornerSet decode_box(const EncodedBox24& enc, const Point3& p);

EncodedBox24 flatten(const CornerSet& corners);
CornerSet unflatten(const EncodedBox24& values);

}  // namespace lfcn
