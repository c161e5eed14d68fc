#include "lidarfcn/detector.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace lfcn {

std::vector<Candidate> extract_candidates(const Tensor<float>& objectness, const Tensor<float>& boxes,
                                          const PointMap& map) {
  const std::size_t rows = std::size_t(map.rows());
  const std::size_t cols = std::size_t(map.cols());
  if (objectness.shape() != std::vector<std::size_t>{2, rows, cols} ||
      boxes.shape() != std::vector<std::size_t>{24, rows, cols}) {
    throw ConfigError("head shapes " + shape_string(objectness.shape()) + " / " +
                      shape_string(boxes.shape()) + " do not match the point map");
  }
  const std::size_t n = map.size();
  std::vector<Candidate> out;
  for (std::size_t i = 0; i < n; ++i) {
    const PointMapCell& cell = map[i];
    if (!cell.occupied) continue;
    const double o0 = objectness[i];
    const double o1 = objectness[n + i];
    if (!(o1 > o0)) continue;
    EncodedBox24 enc;
    for (std::size_t k = 0; k < 24; ++k) enc[k] = boxes[k * n + i];
    Candidate c;
    c.corners = flatten(decode_box(enc, cell.point));
    c.cell = {int(i / cols), int(i % cols)};
    c.point = cell.point;
    c.probability = 1.0 / (1.0 + std::exp(o0 - o1));
    out.push_back(c);
  }
  return out;
}

void NmsConfig::validate() const {
  if (!(delta > 0.0)) throw ConfigError("nms delta must be > 0");
  if (min_score < 0) throw ConfigError("nms min_score must be >= 0");
  if (!(margin >= 0.0)) throw ConfigError("nms margin must be >= 0");
  if (!(max_fit_residual > 0.0)) throw ConfigError("nms fit residual must be > 0");
}

namespace {

double squared_distance(const EncodedBox24& a, const EncodedBox24& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < 24; ++k) {
    const double d = a[k] - b[k];
    s += d * d;
  }
  return s;
}

Point3 corner_mean(const EncodedBox24& c) {
  Point3 m = Point3::Zero();
  for (std::size_t i = 0; i < 8; ++i) m += Point3(c[3 * i], c[3 * i + 1], c[3 * i + 2]);
  return m / 8.0;
}

bool before(const Candidate& a, std::size_t ia, const Candidate& b, std::size_t ib) {
  if (a.cell.row != b.cell.row) return a.cell.row < b.cell.row;
  if (a.cell.col != b.cell.col) return a.cell.col < b.cell.col;
  return ia < ib;
}

}  // namespace

std::vector<Detection> nms(const std::vector<Candidate>& candidates, const NmsConfig& cfg) {
  cfg.validate();
  const std::size_t n = candidates.size();
  const double delta2 = cfg.delta * cfg.delta;
  // Sum over corners of |c_i - c'_i|^2 >= 8 |mean - mean'|^2, so far-apart
  // means can be skipped before the 24-d test.
  const double mean_cut2 = delta2 / 8.0;
  std::vector<Point3> means(n);
  for (std::size_t i = 0; i < n; ++i) means[i] = corner_mean(candidates[i].corners);

  std::vector<std::vector<std::size_t>> neighbors(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if ((means[i] - means[j]).squaredNorm() >= mean_cut2) continue;
      if (squared_distance(candidates[i].corners, candidates[j].corners) < delta2) {
        neighbors[i].push_back(j);
        neighbors[j].push_back(i);
      }
    }
  }
  std::vector<int> score(n);
  for (std::size_t i = 0; i < n; ++i) score[i] = 1 + int(neighbors[i].size());
  std::vector<bool> alive(n, true);
  auto remove = [&](std::size_t i) {
    alive[i] = false;
    for (std::size_t j : neighbors[i]) --score[j];
  };

  std::vector<Detection> out;
  for (;;) {
    std::size_t best = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (!alive[i]) continue;
      if (best == n || score[i] > score[best] ||
          (score[i] == score[best] && before(candidates[i], i, candidates[best], best))) {
        best = i;
      }
    }
    if (best == n || score[best] < cfg.min_score) break;

    const Candidate& pick = candidates[best];
    Box3D box;
    try {
      box = params_from_corners(unflatten(pick.corners), cfg.max_fit_residual);
    } catch (const NumericError&) {
      remove(best);
      continue;
    }
    Detection det;
    det.box = box;
    det.score = score[best];
    det.cell = pick.cell;
    double prob = 0.0;
    std::vector<std::size_t> consumed{best};
    for (std::size_t j = 0; j < n; ++j) {
      if (alive[j] && j != best && box.contains(candidates[j].point, cfg.margin)) consumed.push_back(j);
    }
    for (std::size_t j : consumed) {
      prob += candidates[j].probability;
      remove(j);
    }
    det.consumed = consumed.size();
    det.confidence = prob / double(consumed.size());
    out.push_back(det);
  }
  return out;
}

DetectionResult detect(const Network<float>& net, const RawScan& scan, const DetectorConfig& cfg) {
  DetectionResult r;
  r.map = project_scan(scan, cfg.projection);
  const ForwardCache<float> cache = net.forward(encode_input(r.map, cfg.input));
  HeadOutputs<float> heads = net.heads(cache);
  r.candidates = extract_candidates(heads.objectness, heads.boxes, r.map);
  r.detections = nms(r.candidates, cfg.nms);
  r.objectness = std::move(heads.objectness);
  return r;
}

std::string detection_csv_header() {
  return "scan_id,cx,cy,cz,length,width,height,yaw,score,confidence";
}

void write_detections(const std::filesystem::path& path, const std::string& scan_id,
                      const std::vector<Detection>& detections) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << detection_csv_header() << '\n';
  char buf[512];
  for (const auto& d : detections) {
    std::snprintf(buf, sizeof(buf), "%s,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%d,%.17g\n",
                  scan_id.c_str(), d.box.center.x(), d.box.center.y(), d.box.center.z(),
                  d.box.length, d.box.width, d.box.height, d.box.yaw, d.score, d.confidence);
    out << buf;
  }
  if (!out) throw DataError("failed writing " + path.string());
}

std::vector<DetectionRecord> read_detections(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<DetectionRecord> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line == detection_csv_header()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string tok; std::getline(ss, tok, ',');) f.push_back(tok);
    const std::string where = path.string() + ":" + std::to_string(lineno);
    if (f.size() != 10) throw DataError(where + ": expected 10 fields, got " + std::to_string(f.size()));
    auto num = [&](const std::string& tok) {
      double v = 0.0;
      const char* end = tok.data() + tok.size();
      auto [ptr, ec] = std::from_chars(tok.data(), end, v);
      if (ec != std::errc() || ptr != end) throw DataError(where + ": cannot parse '" + tok + "'");
      return v;
    };
    DetectionRecord r;
    r.scan_id = f[0];
    r.box.center = Point3(num(f[1]), num(f[2]), num(f[3]));
    r.box.length = num(f[4]);
    r.box.width = num(f[5]);
    r.box.height = num(f[6]);
    r.box.yaw = num(f[7]);
    r.score = int(num(f[8]));
    r.confidence = num(f[9]);
    try {
      r.box.validate();
    } catch (const ConfigError& e) {
      throw DataError(where + ": " + e.what());
    }
    out.push_back(r);
  }
  return out;
}

}  // namespace lfcn
