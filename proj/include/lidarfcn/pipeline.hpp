#pragma once

#include "lidarfcn/dataset.hpp"
#include "lidarfcn/detector.hpp"
#include "lidarfcn/evalkit.hpp"
#include "lidarfcn/trainer.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace lfcn {

TrainingSample to_training_sample(const Frame& frame);
std::vector<TrainingSample> load_training_set(const std::filesystem::path& dir);

enum class DifficultyMode { Distance, Height };
DifficultyMode parse_difficulty_mode(const std::string& s);

struct EvalSettings {
  DifficultyConfig difficulty;
  DifficultyMode mode = DifficultyMode::Distance;
  double threshold = 0.7;
  std::optional<std::pair<double, double>> image_size = std::make_pair(1242.0, 375.0);
};

/// Car labels count; Van, Truck and DontCare become ignore objects.
std::vector<GroundTruthObject> groundtruth_objects(const Frame& frame, const EvalSettings& s);
EvalDetection to_eval_detection(const Box3D& box, double confidence, const Calibration& calib,
                                const EvalSettings& s);

struct EvalFrame {
  std::vector<EvalDetection> detections;
  std::vector<GroundTruthObject> groundtruth;
};

enum class Criterion { World, Image };
std::string to_string(Criterion c);

struct MetricsRow {
  Criterion criterion = Criterion::World;
  Difficulty difficulty = Difficulty::Easy;
  std::optional<double> ap;
  std::optional<double> aos;
  double max_recall = 0.0;
  PRCurve curve;
};

MetricsRow evaluate(const std::vector<EvalFrame>& frames, Criterion criterion, Difficulty level,
                    double threshold);

/// CSV `criterion,difficulty,AP,AOS,max_recall`; absent values are written empty.
std::string metrics_csv(const std::vector<MetricsRow>& rows);
/// CSV `confidence,precision,recall,similarity`.
std::string pr_curve_csv(const PRCurve& curve);

}  // namespace lfcn
