#include "lidarfcn/kittio.hpp"

#include <Eigen/LU>

#include <algorithm>

#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <limits>
#include <map>
#include <sstream>

namespace lfcn {

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(bytes.data(), std::streamsize(bytes.size()));
  if (!out) throw DataError("failed writing " + path.string());
}

std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream is(line);
  for (std::string tok; is >> tok;) out.push_back(tok);
  return out;
}

double parse_double(const std::string& tok, const std::string& where) {
  double v = 0.0;
  const char* end = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(tok.data(), end, v);
  if (ec != std::errc() || ptr != end) throw DataError(where + ": cannot parse number '" + tok + "'");
  return v;
}

int parse_int(const std::string& tok, const std::string& where) {
  int v = 0;
  const char* end = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(tok.data(), end, v);
  if (ec != std::errc() || ptr != end) throw DataError(where + ": cannot parse integer '" + tok + "'");
  return v;
}

std::string fmt_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::uint32_t load_le32(const char* p) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= std::uint32_t(std::uint8_t(p[i])) << (8 * i);
  return v;
}

void store_le32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(char((v >> (8 * i)) & 0xFF));
}

double orthonormality_residual(const Mat3& r) {
  return (r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff();
}

}  // namespace

RawScan VelodyneFrame::to_scan() const {
  RawScan scan;
  scan.points.reserve(points.size());
  scan.tags.reserve(points.size());
  for (const auto& p : points) scan.push_back(Point3(p.x, p.y, p.z));
  return scan;
}

VelodyneFrame parse_velodyne(const std::string& bytes) {
  if (bytes.size() % 16 != 0) {
    throw DataError("velodyne data has " + std::to_string(bytes.size()) +
                    " bytes, not a multiple of 16");
  }
  VelodyneFrame frame;
  frame.points.resize(bytes.size() / 16);
  for (std::size_t i = 0; i < frame.points.size(); ++i) {
    const char* p = bytes.data() + 16 * i;
    frame.points[i] = {std::bit_cast<float>(load_le32(p)), std::bit_cast<float>(load_le32(p + 4)),
                       std::bit_cast<float>(load_le32(p + 8)), std::bit_cast<float>(load_le32(p + 12))};
  }
  return frame;
}

VelodyneFrame read_velodyne(const std::filesystem::path& path) {
  try {
    return parse_velodyne(read_file(path));
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void write_velodyne(const std::filesystem::path& path, const VelodyneFrame& frame) {
  std::string bytes;
  bytes.reserve(frame.points.size() * 16);
  for (const auto& p : frame.points) {
    for (float v : {p.x, p.y, p.z, p.reflectance}) store_le32(bytes, std::bit_cast<std::uint32_t>(v));
  }
  write_file(path, bytes);
}

std::vector<KittiLabel> parse_labels(const std::string& text) {
  std::vector<KittiLabel> labels;
  std::istringstream is(text);
  std::string line;
  for (int lineno = 1; std::getline(is, line); ++lineno) {
    const auto f = split_ws(line);
    if (f.empty()) continue;
    const std::string where = "label line " + std::to_string(lineno);
    if (f.size() != 15 && f.size() != 16) {
      throw DataError(where + ": expected 15 or 16 fields, got " + std::to_string(f.size()));
    }
    KittiLabel l;
    l.type = f[0];
    l.truncated = parse_double(f[1], where);
    l.occluded = parse_int(f[2], where);
    l.alpha = parse_double(f[3], where);
    l.bbox = {parse_double(f[4], where), parse_double(f[5], where), parse_double(f[6], where),
              parse_double(f[7], where)};
    l.height = parse_double(f[8], where);
    l.width = parse_double(f[9], where);
    l.length = parse_double(f[10], where);
    l.location = {parse_double(f[11], where), parse_double(f[12], where), parse_double(f[13], where)};
    l.rotation_y = parse_double(f[14], where);
    if (f.size() == 16) l.score = parse_double(f[15], where);
    if (!l.is_dont_care()) {
      if (l.bbox.x2 < l.bbox.x1 || l.bbox.y2 < l.bbox.y1) throw DataError(where + ": inverted 2D box");
      if (!(l.height > 0.0) || !(l.width > 0.0) || !(l.length > 0.0)) {
        throw DataError(where + ": non-positive 3D dimensions");
      }
    }
    labels.push_back(std::move(l));
  }
  return labels;
}

std::vector<KittiLabel> read_labels(const std::filesystem::path& path) {
  try {
    return parse_labels(read_file(path));
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::string format_labels(const std::vector<KittiLabel>& labels) {
  std::string out;
  for (const auto& l : labels) {
    out += l.type + ' ' + fmt_double(l.truncated) + ' ' + std::to_string(l.occluded);
    for (double v : {l.alpha, l.bbox.x1, l.bbox.y1, l.bbox.x2, l.bbox.y2, l.height, l.width, l.length,
                     l.location.x(), l.location.y(), l.location.z(), l.rotation_y}) {
      out += ' ' + fmt_double(v);
    }
    if (l.score) out += ' ' + fmt_double(*l.score);
    out += '\n';
  }
  return out;
}

void write_labels(const std::filesystem::path& path, const std::vector<KittiLabel>& labels) {
  write_file(path, format_labels(labels));
}

KittiCategory category_of(const std::string& type) {
  if (type == "Car") return KittiCategory::Vehicle;
  if (type == "Van" || type == "Truck" || type == "DontCare") return KittiCategory::Ignore;
  return KittiCategory::Background;
}

Calibration Calibration::synthetic() {
  Calibration c;
  c.P2 << 721.5377, 0.0, 609.5593, 0.0,  //
      0.0, 721.5377, 172.854, 0.0,       //
      0.0, 0.0, 1.0, 0.0;
  c.R0_rect.setIdentity();
  c.Tr_velo_to_cam << 0.0, -1.0, 0.0, 0.0,  //
      0.0, 0.0, -1.0, 0.0,                  //
      1.0, 0.0, 0.0, 0.0;
  return c;
}

void Calibration::validate() const {
  if (!P2.allFinite() || !R0_rect.allFinite() || !Tr_velo_to_cam.allFinite()) {
    throw DataError("calibration contains non-finite values");
  }
  const Mat3 a = Tr_velo_to_cam.leftCols<3>();
  if (std::abs(R0_rect.determinant()) < 1e-6 || std::abs(a.determinant()) < 1e-6) {
    throw DataError("calibration transform is singular");
  }
  const double r0 = orthonormality_residual(R0_rect);
  const double tr = orthonormality_residual(a);
  if (r0 > 1e-3 || tr > 1e-3) {
    throw DataError("calibration rotation is not orthonormal (R0_rect residual " +
                    std::to_string(r0) + ", Tr_velo_to_cam residual " + std::to_string(tr) + ")");
  }
}

Point3 Calibration::velo_to_rect(const Point3& p) const {
  return R0_rect * (Tr_velo_to_cam.leftCols<3>() * p + Tr_velo_to_cam.col(3));
}

Point3 Calibration::rect_to_velo(const Point3& p) const {
  const Mat3 a = Tr_velo_to_cam.leftCols<3>();
  return a.inverse() * (R0_rect.inverse() * p - Tr_velo_to_cam.col(3));
}

Calibration parse_calib(const std::string& text) {
  std::map<std::string, std::vector<double>> entries;
  std::istringstream is(text);
  std::string line;
  for (int lineno = 1; std::getline(is, line); ++lineno) {
    if (split_ws(line).empty()) continue;
    const std::string where = "calib line " + std::to_string(lineno);
    const auto colon = line.find(':');
    if (colon == std::string::npos) throw DataError(where + ": missing ':'");
    const auto key_tokens = split_ws(line.substr(0, colon));
    if (key_tokens.size() != 1) throw DataError(where + ": malformed key");
    std::vector<double> values;
    for (const auto& tok : split_ws(line.substr(colon + 1))) values.push_back(parse_double(tok, where));
    const std::string& key = key_tokens[0];
    const std::size_t want = key == "R0_rect" ? 9 : (key == "P2" || key == "Tr_velo_to_cam") ? 12 : 0;
    if (want && values.size() != want) {
      throw DataError(where + ": " + key + " needs " + std::to_string(want) + " values, got " +
                      std::to_string(values.size()));
    }
    entries[key] = std::move(values);
  }
  for (const char* key : {"P2", "R0_rect", "Tr_velo_to_cam"}) {
    if (!entries.count(key)) throw DataError(std::string("calibration is missing ") + key);
  }
  Calibration c;
  for (int r = 0; r < 3; ++r) {
    for (int k = 0; k < 4; ++k) {
      c.P2(r, k) = entries["P2"][std::size_t(4 * r + k)];
      c.Tr_velo_to_cam(r, k) = entries["Tr_velo_to_cam"][std::size_t(4 * r + k)];
    }
    for (int k = 0; k < 3; ++k) c.R0_rect(r, k) = entries["R0_rect"][std::size_t(3 * r + k)];
  }
  c.validate();
  return c;
}

Calibration read_calib(const std::filesystem::path& path) {
  try {
    return parse_calib(read_file(path));
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::string format_calib(const Calibration& calib) {
  auto row_major = [](const auto& m) {
    std::string s;
    for (int r = 0; r < m.rows(); ++r) {
      for (int k = 0; k < m.cols(); ++k) s += ' ' + fmt_double(m(r, k));
    }
    return s;
  };
  std::string out;
  for (const char* p : {"P0", "P1", "P2", "P3"}) out += std::string(p) + ":" + row_major(calib.P2) + "\n";
  out += "R0_rect:" + row_major(calib.R0_rect) + "\n";
  out += "Tr_velo_to_cam:" + row_major(calib.Tr_velo_to_cam) + "\n";
  Mat34 identity = Mat34::Zero();
  identity.leftCols<3>().setIdentity();
  out += "Tr_imu_to_velo:" + row_major(identity) + "\n";
  return out;
}

void write_calib(const std::filesystem::path& path, const Calibration& calib) {
  write_file(path, format_calib(calib));
}

Box3D label_to_lidar_box(const KittiLabel& label, const Calibration& calib) {
  if (label.is_dont_care()) throw DataError("DontCare labels carry no 3D box");
  const Point3 center_rect = label.location - Point3(0.0, 0.5 * label.height, 0.0);
  // The label heading is the ground direction whose image in the rectified
  // frame lies in the plane through (cos ry, 0, -sin ry) and camera y. That
  // keeps the conversion exact when camera y is not quite the lidar vertical.
  const Point3 heading_rect(std::cos(label.rotation_y), 0.0, -std::sin(label.rotation_y));
  const Point3 normal_rect(std::sin(label.rotation_y), 0.0, std::cos(label.rotation_y));
  const Mat3 m = calib.R0_rect * calib.Tr_velo_to_cam.leftCols<3>();
  const Point3 n = m.transpose() * normal_rect;
  Point3 heading(-n.y(), n.x(), 0.0);
  if (heading.norm() < 1e-9 * n.norm()) {
    // Degenerate rig with camera y in the lidar ground plane: map directly.
    heading = m.inverse() * heading_rect;
    heading.z() = 0.0;
  }
  if (heading_rect.dot(m * heading) < 0.0) heading = -heading;
  Box3D box;
  box.center = calib.rect_to_velo(center_rect);
  box.length = label.length;
  box.width = label.width;
  box.height = label.height;
  box.yaw = normalize_angle(std::atan2(heading.y(), heading.x()));
  box.validate();
  return box;
}

KittiLabel lidar_box_to_label(const Box3D& box, const Calibration& calib, const std::string& type,
                              std::optional<std::pair<double, double>> image_size) {
  box.validate();
  KittiLabel l;
  l.type = type;
  l.height = box.height;
  l.width = box.width;
  l.length = box.length;
  l.location = calib.velo_to_rect(box.center) + Point3(0.0, 0.5 * box.height, 0.0);
  const Point3 heading =
      calib.R0_rect * (calib.Tr_velo_to_cam.leftCols<3>() * Point3(std::cos(box.yaw), std::sin(box.yaw), 0.0));
  l.rotation_y = normalize_angle(std::atan2(-heading.z(), heading.x()));
  l.alpha = normalize_angle(l.rotation_y - std::atan2(l.location.x(), l.location.z()));
  try {
    l.bbox = project_box_to_image(box, calib);
    if (image_size) l.bbox = l.bbox.clipped(image_size->first, image_size->second);
  } catch (const DataError&) {
    l.bbox = {};
  }
  return l;
}

Rect project_box_to_image(const Box3D& box, const Calibration& calib) {
  Rect r{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
         -std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  for (const auto& c : corners_from_params(box)) {
    const Point3 x = calib.velo_to_rect(c);
    if (!(x.z() > 0.1)) throw DataError("box corner lies behind the camera");
    const Eigen::Vector3d uvw = calib.P2.leftCols<3>() * x + calib.P2.col(3);
    const double u = uvw.x() / uvw.z();
    const double v = uvw.y() / uvw.z();
    r.x1 = std::min(r.x1, u);
    r.y1 = std::min(r.y1, v);
    r.x2 = std::max(r.x2, u);
    r.y2 = std::max(r.y2, v);
  }
  return r;
}

}  // namespace lfcn
