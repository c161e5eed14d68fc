#pragma once

#include "lidarfcn/kittio.hpp"
#include "lidarfcn/labels.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace lfcn {

/// One frame of a KITTI-layout directory (velodyne/, label_2/, calib/).
struct Frame {
  std::string id;
  RawScan scan;
  std::vector<KittiLabel> labels;
  Calibration calib;
};

/// Frame ids from manifest.txt, or from velodyne/*.bin when there is no manifest.
std::vector<std::string> list_frames(const std::filesystem::path& dir);

/// Loads a frame; the label file may be absent (no groundtruth).
Frame load_frame(const std::filesystem::path& dir, const std::string& id);

/// Lidar box of a label. DontCare labels only have one when they carry
/// positive 3D extents.
std::optional<Box3D> label_box(const KittiLabel& label, const Calibration& calib);

/// Car labels as vehicles; Van, Truck and DontCare with 3D extents as ignore boxes.
std::vector<LabeledBox> training_boxes(const Frame& frame);

}  // namespace lfcn
