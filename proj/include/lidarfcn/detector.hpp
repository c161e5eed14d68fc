#pragma once

#include "lidarfcn/boxcodec.hpp"
#include "lidarfcn/labels.hpp"
#include "lidarfcn/network.hpp"
#include "lidarfcn/pointmap.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace lfcn {

struct Candidate {
  EncodedBox24 corners;  // decoded world-frame corners, concatenated
  CellIndex cell;
  Point3 point = Point3::Zero();
  double probability = 0.0;  // softmax of the vehicle channel
};

struct Detection {
  Box3D box;
  int score = 0;            // neighbor count of the picked candidate, itself included
  double confidence = 0.0;  // mean vehicle probability over consumed candidates
  CellIndex cell;           // source cell of the picked candidate
  std::size_t consumed = 0;
};

/// One candidate per occupied cell whose vehicle logit beats the background logit.
std::vector<Candidate> extract_candidates(const Tensor<float>& objectness, const Tensor<float>& boxes,
                                          const PointMap& map);

struct NmsConfig {
  double delta = 2.0;          // neighbor radius in the 24-d corner space, meters
  int min_score = 5;
  double margin = 0.1;         // containment margin on every face
  double max_fit_residual = 0.5;

  void validate() const;
};

/// Neighbor-count suppression. Scores count the remaining candidates within
/// delta; the best (ties: lower row, then lower column) is fitted to a box and
/// every remaining candidate whose point lies inside it is removed together
/// with the pick. Stops when the best remaining score is below min_score. A
/// pick whose corners do not fit a box is dropped on its own.
std::vector<Detection> nms(const std::vector<Candidate>& candidates, const NmsConfig& cfg);

struct DetectorConfig {
  ProjectionConfig projection;
  InputEncoding input;
  NmsConfig nms;
};

struct DetectionResult {
  PointMap map;
  Tensor<float> objectness;
  std::vector<Candidate> candidates;
  std::vector<Detection> detections;
};

/// project -> forward -> extract_candidates -> nms.
DetectionResult detect(const Network<float>& net, const RawScan& scan, const DetectorConfig& cfg);

/// CSV `scan_id,cx,cy,cz,length,width,height,yaw,score,confidence`.
struct DetectionRecord {
  std::string scan_id;
  Box3D box;
  int score = 0;
  double confidence = 0.0;
};

std::string detection_csv_header();
void write_detections(const std::filesystem::path& path, const std::string& scan_id,
                      const std::vector<Detection>& detections);
std::vector<DetectionRecord> read_detections(const std::filesystem::path& path);

}  // namespace lfcn
