#pragma once

#include "lidarfcn/geometry.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace lfcn {

/// Ground-plane IoU of two oriented boxes; 0 for zero-area boxes.
double ground_iou(const Box3D& a, const Box3D& b);
double image_iou(const Rect& a, const Rect& b);

enum class Difficulty { Easy = 0, Moderate = 1, Hard = 2 };

std::string to_string(Difficulty d);

struct DifficultyConfig {
  double easy_max_distance = 28.0;
  double moderate_max_distance = 47.0;
  double easy_min_height_px = 40.0;
  double moderate_min_height_px = 25.0;
};

/// Distance proxy on the ground plane: easy within 28 m, moderate within 47 m.
Difficulty assign_difficulty(const Box3D& box, const DifficultyConfig& cfg = {});
/// Pixel-height binning for when a calibrated image rectangle is available.
Difficulty difficulty_from_height(double pixel_height, const DifficultyConfig& cfg = {});

enum class GtClass { Car, Ignore };

struct GroundTruthObject {
  Box3D box;
  GtClass cls = GtClass::Car;
  Difficulty difficulty = Difficulty::Easy;
  std::optional<Rect> image_rect;
};

struct EvalDetection {
  Box3D box;
  double confidence = 0.0;
  Difficulty difficulty = Difficulty::Easy;
  std::optional<Rect> image_rect;
};

/// Overlap of a detection with a groundtruth object; nullopt (treated as no
/// overlap) when the pair cannot be compared, e.g. a missing image rectangle.
using OverlapFn = std::function<std::optional<double>(const EvalDetection&, const GroundTruthObject&)>;

std::optional<double> world_overlap(const EvalDetection& det, const GroundTruthObject& gt);
std::optional<double> image_overlap(const EvalDetection& det, const GroundTruthObject& gt);

struct RankedDetection {
  double confidence = 0.0;
  bool true_positive = false;
  double similarity = 0.0;  // (1 + cos dyaw) / 2 for true positives, 0 otherwise
};

/// Scored detections of one frame plus the number of groundtruth objects that count.
struct FrameMatch {
  std::vector<RankedDetection> detections;
  std::size_t num_groundtruth = 0;
};

/// Greedy matching in descending confidence at evaluation level `level`.
/// Car objects harder than `level` behave like ignore objects. A detection
/// overlapping an ignore object by at least `threshold` is dropped, as is an
/// unmatched detection that is itself harder than `level`.
FrameMatch match_frame(const std::vector<EvalDetection>& detections,
                       const std::vector<GroundTruthObject>& groundtruth, const OverlapFn& overlap,
                       double threshold = 0.7, Difficulty level = Difficulty::Hard);

struct PRCurve {
  std::vector<RankedDetection> ranked;  // descending confidence
  std::vector<double> precision;
  std::vector<double> recall;
  std::vector<double> similarity;       // cumulative similarity / detections so far
  std::size_t num_groundtruth = 0;

  static PRCurve build(const std::vector<FrameMatch>& frames);
  double max_recall() const { return recall.empty() ? 0.0 : recall.back(); }
};

PRCurve match(const std::vector<EvalDetection>& detections,
              const std::vector<GroundTruthObject>& groundtruth, const OverlapFn& overlap,
              double threshold = 0.7, Difficulty level = Difficulty::Hard);

/// 11-point interpolated AP; nullopt without groundtruth.
std::optional<double> average_precision(const PRCurve& curve);
/// 11-point interpolated average orientation similarity; nullopt without groundtruth.
std::optional<double> average_orientation_similarity(const PRCurve& curve);
/// Non-interpolated area under the PR curve, for diagnostics.
std::optional<double> exact_average_precision(const PRCurve& curve);

double orientation_similarity(double yaw_a, double yaw_b);

}  // namespace lfcn
