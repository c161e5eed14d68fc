#include "lidarfcn/pipeline.hpp"

#include <cstdio>

namespace lfcn {

TrainingSample to_training_sample(const Frame& frame) {
  return {frame.id, frame.scan, training_boxes(frame)};
}

std::vector<TrainingSample> load_training_set(const std::filesystem::path& dir) {
  std::vector<TrainingSample> out;
  for (const auto& id : list_frames(dir)) out.push_back(to_training_sample(load_frame(dir, id)));
  return out;
}

DifficultyMode parse_difficulty_mode(const std::string& s) {
  if (s == "distance") return DifficultyMode::Distance;
  if (s == "height") return DifficultyMode::Height;
  throw ConfigError("difficulty mode must be 'distance' or 'height', got '" + s + "'");
}

std::vector<GroundTruthObject> groundtruth_objects(const Frame& frame, const EvalSettings& s) {
  std::vector<GroundTruthObject> out;
  for (const auto& l : frame.labels) {
    const KittiCategory cat = category_of(l.type);
    if (cat == KittiCategory::Background) continue;
    GroundTruthObject g;
    g.cls = cat == KittiCategory::Vehicle ? GtClass::Car : GtClass::Ignore;
    if (const auto box = label_box(l, frame.calib)) {
      g.box = *box;
    } else {
      g.box.length = g.box.width = g.box.height = 0.0;  // no 3D extent: never overlaps
    }
    g.image_rect = l.bbox;
    g.difficulty = s.mode == DifficultyMode::Height ? difficulty_from_height(l.bbox.height(), s.difficulty)
                                                    : assign_difficulty(g.box, s.difficulty);
    out.push_back(g);
  }
  return out;
}

EvalDetection to_eval_detection(const Box3D& box, double confidence, const Calibration& calib,
                                const EvalSettings& s) {
  EvalDetection d;
  d.box = box;
  d.confidence = confidence;
  try {
    Rect r = project_box_to_image(box, calib);
    if (s.image_size) r = r.clipped(s.image_size->first, s.image_size->second);
    d.image_rect = r;
  } catch (const DataError&) {
    d.image_rect.reset();
  }
  if (s.mode == DifficultyMode::Height) {
    d.difficulty = difficulty_from_height(d.image_rect ? d.image_rect->height() : 0.0, s.difficulty);
  } else {
    d.difficulty = assign_difficulty(box, s.difficulty);
  }
  return d;
}

std::string to_string(Criterion c) { return c == Criterion::World ? "world" : "image"; }

MetricsRow evaluate(const std::vector<EvalFrame>& frames, Criterion criterion, Difficulty level,
                    double threshold) {
  const OverlapFn overlap = criterion == Criterion::World ? OverlapFn(world_overlap) : OverlapFn(image_overlap);
  std::vector<FrameMatch> matches;
  matches.reserve(frames.size());
  for (const auto& f : frames) matches.push_back(match_frame(f.detections, f.groundtruth, overlap, threshold, level));
  MetricsRow row;
  row.criterion = criterion;
  row.difficulty = level;
  row.curve = PRCurve::build(matches);
  row.ap = average_precision(row.curve);
  row.aos = average_orientation_similarity(row.curve);
  row.max_recall = row.curve.max_recall();
  return row;
}

std::string metrics_csv(const std::vector<MetricsRow>& rows) {
  std::string out = "criterion,difficulty,AP,AOS,max_recall\n";
  char buf[64];
  auto opt = [&](const std::optional<double>& v) {
    if (!v) return std::string();
    std::snprintf(buf, sizeof(buf), "%.6f", *v);
    return std::string(buf);
  };
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%.6f", r.max_recall);
    const std::string recall = buf;
    out += to_string(r.criterion) + "," + to_string(r.difficulty) + "," + opt(r.ap) + "," + opt(r.aos) +
           "," + recall + "\n";
  }
  return out;
}

std::string pr_curve_csv(const PRCurve& curve) {
  std::string out = "confidence,precision,recall,similarity\n";
  char buf[160];
  for (std::size_t i = 0; i < curve.ranked.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.9g,%.9g,%.9g,%.9g\n", curve.ranked[i].confidence, curve.precision[i],
                  curve.recall[i], curve.similarity[i]);
    out += buf;
  }
  return out;
}

}  // namespace lfcn
