#include "lidarfcn/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace lfcn {

double ground_iou(const Box3D& a, const Box3D& b) {
  const double area_a = a.length * a.width;
  const double area_b = b.length * b.width;
  if (!(area_a > 0.0) || !(area_b > 0.0)) return 0.0;
  const double inter = ground_intersection_area(a, b);
  const double uni = area_a + area_b - inter;
  return uni > 0.0 ? std::clamp(inter / uni, 0.0, 1.0) : 0.0;
}

double image_iou(const Rect& a, const Rect& b) {
  const Rect inter{std::max(a.x1, b.x1), std::max(a.y1, b.y1), std::min(a.x2, b.x2),
                   std::min(a.y2, b.y2)};
  const double i = inter.area();
  const double u = a.area() + b.area() - i;
  return u > 0.0 ? i / u : 0.0;
}

std::string to_string(Difficulty d) {
  switch (d) {
    case Difficulty::Easy: return "easy";
    case Difficulty::Moderate: return "moderate";
    case Difficulty::Hard: return "hard";
  }
  return "?";
}

Difficulty assign_difficulty(const Box3D& box, const DifficultyConfig& cfg) {
  const double dist = std::hypot(box.center.x(), box.center.y());
  if (dist <= cfg.easy_max_distance) return Difficulty::Easy;
  if (dist <= cfg.moderate_max_distance) return Difficulty::Moderate;
  return Difficulty::Hard;
}

Difficulty difficulty_from_height(double pixel_height, const DifficultyConfig& cfg) {
  if (pixel_height >= cfg.easy_min_height_px) return Difficulty::Easy;
  if (pixel_height >= cfg.moderate_min_height_px) return Difficulty::Moderate;
  return Difficulty::Hard;
}

std::optional<double> world_overlap(const EvalDetection& det, const GroundTruthObject& gt) {
  return ground_iou(det.box, gt.box);
}

std::optional<double> image_overlap(const EvalDetection& det, const GroundTruthObject& gt) {
  if (!det.image_rect || !gt.image_rect) return std::nullopt;
  return image_iou(*det.image_rect, *gt.image_rect);
}

double orientation_similarity(double yaw_a, double yaw_b) {
  return 0.5 * (1.0 + std::cos(yaw_a - yaw_b));
}

FrameMatch match_frame(const std::vector<EvalDetection>& detections,
                       const std::vector<GroundTruthObject>& groundtruth, const OverlapFn& overlap,
                       double threshold, Difficulty level) {
  FrameMatch out;
  std::vector<bool> counts(groundtruth.size());
  for (std::size_t g = 0; g < groundtruth.size(); ++g) {
    counts[g] = groundtruth[g].cls == GtClass::Car && groundtruth[g].difficulty <= level;
    out.num_groundtruth += counts[g] ? 1 : 0;
  }

  std::vector<std::size_t> order(detections.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return detections[a].confidence > detections[b].confidence;
  });

  std::vector<bool> taken(groundtruth.size(), false);
  for (std::size_t d : order) {
    const EvalDetection& det = detections[d];
    int best = -1;
    double best_overlap = -1.0;
    bool neutral = false;
    for (std::size_t g = 0; g < groundtruth.size(); ++g) {
      const auto ov = overlap(det, groundtruth[g]);
      if (!ov || *ov < threshold) continue;
      if (!counts[g]) {
        neutral = true;
        continue;
      }
      if (!taken[g] && *ov > best_overlap) {
        best_overlap = *ov;
        best = int(g);
      }
    }
    if (best >= 0) {
      taken[std::size_t(best)] = true;
      out.detections.push_back(
          {det.confidence, true, orientation_similarity(det.box.yaw, groundtruth[std::size_t(best)].box.yaw)});
    } else if (neutral || det.difficulty > level) {
      continue;
    } else {
      out.detections.push_back({det.confidence, false, 0.0});
    }
  }
  return out;
}

PRCurve PRCurve::build(const std::vector<FrameMatch>& frames) {
  PRCurve c;
  for (const auto& f : frames) {
    c.num_groundtruth += f.num_groundtruth;
    c.ranked.insert(c.ranked.end(), f.detections.begin(), f.detections.end());
  }
  std::stable_sort(c.ranked.begin(), c.ranked.end(),
                   [](const RankedDetection& a, const RankedDetection& b) { return a.confidence > b.confidence; });
  double tp = 0.0;
  double sim = 0.0;
  for (std::size_t i = 0; i < c.ranked.size(); ++i) {
    if (c.ranked[i].true_positive) {
      tp += 1.0;
      sim += c.ranked[i].similarity;
    }
    const double n = double(i + 1);
    c.precision.push_back(tp / n);
    c.similarity.push_back(sim / n);
    c.recall.push_back(c.num_groundtruth ? tp / double(c.num_groundtruth) : 0.0);
  }
  return c;
}

PRCurve match(const std::vector<EvalDetection>& detections,
              const std::vector<GroundTruthObject>& groundtruth, const OverlapFn& overlap,
              double threshold, Difficulty level) {
  return PRCurve::build({match_frame(detections, groundtruth, overlap, threshold, level)});
}

namespace {

std::optional<double> eleven_point(const PRCurve& curve, const std::vector<double>& values) {
  if (curve.num_groundtruth == 0) return std::nullopt;
  double sum = 0.0;
  for (int k = 0; k <= 10; ++k) {
    const double level = k / 10.0;
    double best = 0.0;
    for (std::size_t i = 0; i < curve.recall.size(); ++i) {
      if (curve.recall[i] >= level - 1e-12) best = std::max(best, values[i]);
    }
    sum += best;
  }
  return sum / 11.0;
}

}  // namespace

std::optional<double> average_precision(const PRCurve& curve) {
  return eleven_point(curve, curve.precision);
}

std::optional<double> average_orientation_similarity(const PRCurve& curve) {
  return eleven_point(curve, curve.similarity);
}

std::optional<double> exact_average_precision(const PRCurve& curve) {
  if (curve.num_groundtruth == 0) return std::nullopt;
  double area = 0.0;
  double prev_recall = 0.0;
  for (std::size_t i = 0; i < curve.ranked.size(); ++i) {
    if (!curve.ranked[i].true_positive) continue;
    area += curve.precision[i] * (curve.recall[i] - prev_recall);
    prev_recall = curve.recall[i];
  }
  return area;
}

}  // namespace lfcn
