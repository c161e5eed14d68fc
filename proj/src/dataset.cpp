#include "lidarfcn/dataset.hpp"

#include <algorithm>
#include <fstream>

namespace lfcn {

namespace fs = std::filesystem;

std::vector<std::string> list_frames(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError("dataset directory " + dir.string() + " does not exist");
  std::vector<std::string> ids;
  const fs::path manifest = dir / "manifest.txt";
  if (fs::exists(manifest)) {
    std::ifstream in(manifest);
    if (!in) throw DataError("cannot read " + manifest.string());
    for (std::string line; std::getline(in, line);) {
      line.erase(line.find_last_not_of(" \t\r") + 1);
      line.erase(0, line.find_first_not_of(" \t"));
      if (!line.empty() && line[0] != '#') ids.push_back(line);
    }
    return ids;
  }
  const fs::path velo = dir / "velodyne";
  if (!fs::is_directory(velo)) throw DataError(dir.string() + " has neither manifest.txt nor velodyne/");
  for (const auto& entry : fs::directory_iterator(velo)) {
    if (entry.path().extension() == ".bin") ids.push_back(entry.path().stem().string());
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

Frame load_frame(const fs::path& dir, const std::string& id) {
  Frame f;
  f.id = id;
  f.scan = read_velodyne(dir / "velodyne" / (id + ".bin")).to_scan();
  const fs::path calib = dir / "calib" / (id + ".txt");
  f.calib = fs::exists(calib) ? read_calib(calib) : Calibration::synthetic();
  const fs::path labels = dir / "label_2" / (id + ".txt");
  if (fs::exists(labels)) f.labels = read_labels(labels);
  return f;
}

std::optional<Box3D> label_box(const KittiLabel& label, const Calibration& calib) {
  if (label.is_dont_care()) {
    if (!(label.height > 0.0 && label.width > 0.0 && label.length > 0.0)) return std::nullopt;
    KittiLabel copy = label;
    copy.type = "Ignore";
    return label_to_lidar_box(copy, calib);
  }
  return label_to_lidar_box(label, calib);
}

std::vector<LabeledBox> training_boxes(const Frame& frame) {
  std::vector<LabeledBox> boxes;
  for (const auto& l : frame.labels) {
    const KittiCategory cat = category_of(l.type);
    if (cat == KittiCategory::Background) continue;
    const auto box = label_box(l, frame.calib);
    if (!box) continue;
    boxes.push_back({*box, cat == KittiCategory::Vehicle ? BoxClass::Vehicle : BoxClass::Ignore});
  }
  return boxes;
}

}  // namespace lfcn
