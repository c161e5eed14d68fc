#include "lidarfcn/boxcodec.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace lfcn {

void Box3D::validate() const {
  if (!center.allFinite() || !std::isfinite(yaw)) throw ConfigError("box has non-finite pose");
  if (!(length > 0.0) || !(width > 0.0) || !(height > 0.0) || !std::isfinite(length) ||
      !std::isfinite(width) || !std::isfinite(height)) {
    std::ostringstream os;
    os << "box extents must be positive, got " << length << " x " << width << " x " << height;
    throw ConfigError(os.str());
  }
}

bool Box3D::contains(const Point3& p, double margin) const {
  const double c = std::cos(yaw);
  const double s = std::sin(yaw);
  const Point3 d = p - center;
  const double lx = c * d.x() + s * d.y();
  const double ly = -s * d.x() + c * d.y();
  return std::abs(lx) <= 0.5 * length + margin && std::abs(ly) <= 0.5 * width + margin &&
         std::abs(d.z()) <= 0.5 * height + margin;
}

namespace {

constexpr std::array<std::array<int, 3>, 8> kCornerSigns = {{
    {+1, +1, -1}, {-1, +1, -1}, {-1, -1, -1}, {+1, -1, -1},
    {+1, +1, +1}, {-1, +1, +1}, {-1, -1, +1}, {+1, -1, +1},
}};

// Corner pairs (head, tail) whose difference runs along box-local +x, +y, +z.
constexpr std::array<std::array<int, 2>, 4> kXEdges = {{{0, 1}, {3, 2}, {4, 5}, {7, 6}}};
constexpr std::array<std::array<int, 2>, 4> kYEdges = {{{0, 3}, {1, 2}, {4, 7}, {5, 6}}};
constexpr std::array<std::array<int, 2>, 4> kZEdges = {{{4, 0}, {5, 1}, {6, 2}, {7, 3}}};

}  // namespace

CornerSet corners_from_params(const Box3D& box) {
  const double c = std::cos(box.yaw);
  const double s = std::sin(box.yaw);
  CornerSet out;
  for (std::size_t i = 0; i < 8; ++i) {
    const double lx = 0.5 * box.length * kCornerSigns[i][0];
    const double ly = 0.5 * box.width * kCornerSigns[i][1];
    const double lz = 0.5 * box.height * kCornerSigns[i][2];
    out[i] = box.center + Point3(c * lx - s * ly, s * lx + c * ly, lz);
  }
  return out;
}

Box3D params_from_corners(const CornerSet& corners, double max_residual) {
  for (const auto& p : corners) {
    if (!p.allFinite()) throw NumericError("corner set contains non-finite values");
  }
  Box3D box;
  box.center = Point3::Zero();
  for (const auto& p : corners) box.center += p;
  box.center /= 8.0;

  // Heading: x edges plus y edges turned by -90 degrees all estimate +x.
  Eigen::Vector2d heading = Eigen::Vector2d::Zero();
  for (const auto& [a, b] : kXEdges) heading += (corners[a] - corners[b]).head<2>();
  for (const auto& [a, b] : kYEdges) {
    const Eigen::Vector2d e = (corners[a] - corners[b]).head<2>();
    heading += Eigen::Vector2d(e.y(), -e.x());
  }
  if (heading.norm() < 1e-9) throw NumericError("corner set has no ground-plane extent");
  box.yaw = normalize_angle(std::atan2(heading.y(), heading.x()));
  const Eigen::Vector2d ax(std::cos(box.yaw), std::sin(box.yaw));
  const Eigen::Vector2d ay(-ax.y(), ax.x());

  double length = 0.0;
  double width = 0.0;
  double height = 0.0;
  for (const auto& [a, b] : kXEdges) length += ax.dot((corners[a] - corners[b]).head<2>());
  for (const auto& [a, b] : kYEdges) width += ay.dot((corners[a] - corners[b]).head<2>());
  for (const auto& [a, b] : kZEdges) height += corners[a].z() - corners[b].z();
  box.length = length / 4.0;
  box.width = width / 4.0;
  box.height = height / 4.0;
  if (!(box.length > 1e-6) || !(box.width > 1e-6) || !(box.height > 1e-6)) {
    std::ostringstream os;
    os << "degenerate corner set: fitted extents " << box.length << " x " << box.width << " x "
       << box.height;
    throw NumericError(os.str());
  }

  const CornerSet fitted = corners_from_params(box);
  double worst = 0.0;
  std::size_t worst_corner = 0;
  for (std::size_t i = 0; i < 8; ++i) {
    const double r = (fitted[i] - corners[i]).norm();
    if (r > worst) {
      worst = r;
      worst_corner = i;
    }
  }
  if (worst > max_residual) {
    std::ostringstream os;
    os << "corner set is not a box: corner " << worst_corner + 1 << " deviates " << worst
       << " m from the fitted box (limit " << max_residual << " m)";
    throw NumericError(os.str());
  }
  return box;
}

ObservationBasis observation_basis(const Point3& p) {
  const double range = p.norm();
  if (!(range > 0.0) || !p.allFinite()) {
    throw ConfigError("observation basis is undefined at the sensor origin");
  }
  const double d = std::hypot(p.x(), p.y());
  const double cos_phi = d / range;
  const double sin_phi = p.z() / range;
  double cos_theta = 1.0;
  double sin_theta = 0.0;
  if (d > 0.0) {
    cos_theta = p.x() / d;
    sin_theta = p.y() / d;
  }
  ObservationBasis basis;
  basis.rotation << cos_theta * cos_phi, -sin_theta, -cos_theta * sin_phi,  //
      sin_theta * cos_phi, cos_theta, -sin_theta * sin_phi,                 //
      sin_phi, 0.0, cos_phi;
  return basis;
}

EncodedBox24 encode_corners(const CornerSet& corners, const Point3& p) {
  const Mat3 rt = observation_basis(p).rotation.transpose();
  EncodedBox24 out;
  for (std::size_t i = 0; i < 8; ++i) {
    const Point3 e = rt * (corners[i] - p);
    out[3 * i] = e.x();
    out[3 * i + 1] = e.y();
    out[3 * i + 2] = e.z();
  }
  return out;
}

EncodedBox24 encode_box(const Box3D& box, const Point3& p) {
  box.validate();
  return encode_corners(corners_from_params(box), p);
}

CornerSet decode_box(const EncodedBox24& enc, const Point3& p) {
  const Mat3 r = observation_basis(p).rotation;
  CornerSet out;
  for (std::size_t i = 0; i < 8; ++i) {
    out[i] = r * Point3(enc[3 * i], enc[3 * i + 1], enc[3 * i + 2]) + p;
  }
  return out;
}

EncodedBox24 flatten(const CornerSet& corners) {
  EncodedBox24 out;
  for (std::size_t i = 0; i < 8; ++i) {
    for (int k = 0; k < 3; ++k) out[3 * i + k] = corners[i][k];
  }
  return out;
}

CornerSet unflatten(const EncodedBox24& values) {
  CornerSet out;
  for (std::size_t i = 0; i < 8; ++i) out[i] = Point3(values[3 * i], values[3 * i + 1], values[3 * i + 2]);
  return out;
}

}  // namespace lfcn
