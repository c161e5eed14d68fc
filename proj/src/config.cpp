#include "lidarfcn/config.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace lfcn {

namespace {

using V = ValueType;

const std::vector<ConfigKey> kKeys = {
    {"projection.rows", V::Int, "64", "point map rows (elevation)"},
    {"projection.cols", V::Int, "448", "point map columns (azimuth), window centered on +x"},
    {"projection.delta_theta_deg", V::Double, "0.2", "azimuth resolution, degrees per column"},
    {"projection.delta_phi_deg", V::Double, "0.4", "elevation resolution, degrees per row"},
    {"projection.phi_min_deg", V::Double, "-22.4", "lowest elevation of the window, degrees"},
    {"net.conv1", V::Int, "16", "conv1 channels"},
    {"net.conv2", V::Int, "32", "conv2 channels"},
    {"net.conv3", V::Int, "64", "conv3 channels"},
    {"net.deconv4", V::Int, "32", "deconv4 channels"},
    {"net.deconv5", V::Int, "16", "deconv5a/b channels"},
    {"input.d_scale", V::Double, "0.05", "scale of the d channel"},
    {"input.z_scale", V::Double, "0.5", "scale of the z channel"},
    {"loss.k", V::Double, "4", "negative balance factor"},
    {"loss.w_box", V::Double, "0.05", "weight of the box loss"},
    {"loss.mean_vehicle_points", V::Double, "0", "n-bar; 0 computes it from the training set"},
    {"labels.margin", V::Double, "0.05", "box containment margin for labels, meters"},
    {"labels.canonical_heading", V::Bool, "true", "regress vehicles with the heading turned away from the sensor"},
    {"train.iterations", V::Int, "2000", "total iterations"},
    {"train.learning_rate", V::Double, "0.0001", "SGD learning rate"},
    {"train.momentum", V::Double, "0.9", "SGD momentum"},
    {"train.lr_decay", V::Double, "1", "learning-rate factor applied every lr_step iterations"},
    {"train.lr_step", V::Int, "0", "iterations per decay step, 0 for constant"},
    {"train.clip_norm", V::Double, "300", "global gradient norm cap, 0 disables"},
    {"train.divergence_threshold", V::Double, "1e6", "loss above which training stops"},
    {"train.seed", V::UInt, "1", "initialization and sampling seed"},
    {"augment.max_rotation_deg", V::Double, "10", "max |rotation| about z, degrees"},
    {"augment.max_translation_xy", V::Double, "1", "max |translation| in x and y, meters"},
    {"augment.max_translation_z", V::Double, "0.2", "max |translation| in z, meters"},
    {"nms.delta", V::Double, "2", "neighbor radius in corner space, meters"},
    {"nms.min_score", V::Int, "5", "minimum neighbor count of a detection"},
    {"nms.margin", V::Double, "0.1", "containment margin when consuming candidates, meters"},
    {"nms.max_fit_residual", V::Double, "0.5", "largest corner residual of a box fit, meters"},
    {"synth.seed", V::UInt, "1", "dataset seed"},
    {"synth.min_vehicles", V::Int, "1", "fewest vehicles per scene"},
    {"synth.max_vehicles", V::Int, "6", "most vehicles per scene"},
    {"synth.min_distance", V::Double, "5", "inner radius of vehicle centers, meters"},
    {"synth.max_distance", V::Double, "60", "outer radius of vehicle centers, meters"},
    {"synth.length_min", V::Double, "3.5", "vehicle length range, meters"},
    {"synth.length_max", V::Double, "5", ""},
    {"synth.width_min", V::Double, "1.6", "vehicle width range, meters"},
    {"synth.width_max", V::Double, "2", ""},
    {"synth.height_min", V::Double, "1.4", "vehicle height range, meters"},
    {"synth.height_max", V::Double, "1.8", ""},
    {"synth.min_gap", V::Double, "0.5", "free space between object footprints, meters"},
    {"synth.max_clutter", V::Int, "3", "most background objects per scene"},
    {"synth.z_ground", V::Double, "-1.7", "ground plane height, meters"},
    {"synth.noise_std", V::Double, "0.01", "range noise, meters"},
    {"synth.max_range", V::Double, "120", "sensor range, meters"},
    {"synth.max_tries", V::Int, "1000", "placement attempts per object"},
    {"synth.min_visible_points", V::Int, "10", "vehicles with fewer points are labeled DontCare"},
    {"eval.threshold", V::Double, "0.7", "overlap needed for a match"},
    {"eval.easy_distance", V::Double, "28", "easy bin upper distance, meters"},
    {"eval.moderate_distance", V::Double, "47", "moderate bin upper distance, meters"},
    {"eval.easy_height_px", V::Double, "40", "easy bin minimum pixel height"},
    {"eval.moderate_height_px", V::Double, "25", "moderate bin minimum pixel height"},
    {"eval.difficulty", V::String, "distance", "difficulty binning: distance or height"},
    {"eval.image_width", V::Double, "1242", "image width for clipping, pixels"},
    {"eval.image_height", V::Double, "375", "image height for clipping, pixels"},
    {"eval.clip_to_image", V::Bool, "true", "clip projected rectangles to the image"},
    {"gradcheck.rows", V::Int, "8", "toy map rows"},
    {"gradcheck.cols", V::Int, "16", "toy map columns"},
    {"gradcheck.conv1", V::Int, "4", "toy conv1 channels"},
    {"gradcheck.conv2", V::Int, "8", "toy conv2 channels"},
    {"gradcheck.conv3", V::Int, "16", "toy conv3 channels"},
    {"gradcheck.samples", V::Int, "100", "parameters checked in the full network"},
    {"gradcheck.epsilon", V::Double, "1e-5", "central difference step"},
    {"gradcheck.tolerance", V::Double, "1e-4", "largest accepted relative error"},
    {"gradcheck.seed", V::UInt, "1", "gradient check seed"},
};

const ConfigKey& find_key(const std::string& name) {
  for (const auto& k : kKeys) {
    if (k.name == name) return k;
  }
  throw ConfigError("unknown config key '" + name + "'");
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename N>
bool parse_number(const std::string& s, N& out) {
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end;
}

void check_value(const ConfigKey& key, const std::string& value) {
  bool ok = true;
  switch (key.type) {
    case V::Double: {
      double v;
      ok = parse_number(value, v);
      break;
    }
    case V::Int: {
      int v;
      ok = parse_number(value, v);
      break;
    }
    case V::UInt: {
      std::uint64_t v;
      ok = parse_number(value, v);
      break;
    }
    case V::Bool:
      ok = value == "true" || value == "false";
      break;
    case V::String:
      ok = !value.empty();
      break;
  }
  if (!ok) throw ConfigError("invalid value '" + value + "' for " + key.name);
}

}  // namespace

RunConfig::RunConfig() {
  for (const auto& k : kKeys) values_[k.name] = k.default_value;
}

const std::vector<ConfigKey>& RunConfig::keys() { return kKeys; }

void RunConfig::set(const std::string& key, const std::string& value) {
  const ConfigKey& k = find_key(key);
  const std::string v = trim(value);
  check_value(k, v);
  values_[key] = v;
}

void RunConfig::set_assignment(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("expected key=value, got '" + assignment + "'");
  set(trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
}

const std::string& RunConfig::get(const std::string& key) const {
  find_key(key);
  return values_.at(key);
}

double RunConfig::get_double(const std::string& key) const {
  double v = 0.0;
  parse_number(get(key), v);
  return v;
}

int RunConfig::get_int(const std::string& key) const {
  int v = 0;
  parse_number(get(key), v);
  return v;
}

std::uint64_t RunConfig::get_uint(const std::string& key) const {
  std::uint64_t v = 0;
  parse_number(get(key), v);
  return v;
}

bool RunConfig::get_bool(const std::string& key) const { return get(key) == "true"; }

void RunConfig::merge_text(const std::string& text, const std::string& source) {
  std::istringstream in(text);
  std::string line;
  for (int lineno = 1; std::getline(in, line); ++lineno) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    try {
      set_assignment(line);
    } catch (const ConfigError& e) {
      throw ConfigError(source + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

void RunConfig::merge_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  merge_text(ss.str(), path.string());
}

std::string RunConfig::serialize() const {
  std::string out;
  for (const auto& k : kKeys) out += k.name + " = " + values_.at(k.name) + "\n";
  return out;
}

void RunConfig::write(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << serialize();
}

ProjectionConfig RunConfig::projection() const {
  ProjectionConfig p = ProjectionConfig::centered(
      get_int("projection.rows"), get_int("projection.cols"), deg2rad(get_double("projection.delta_theta_deg")),
      deg2rad(get_double("projection.delta_phi_deg")), deg2rad(get_double("projection.phi_min_deg")));
  p.validate();
  return p;
}

FcnOptions RunConfig::network() const {
  FcnOptions o;
  o.conv1_channels = get_int("net.conv1");
  o.conv2_channels = get_int("net.conv2");
  o.conv3_channels = get_int("net.conv3");
  o.deconv4_channels = get_int("net.deconv4");
  o.deconv5_channels = get_int("net.deconv5");
  return o;
}

InputEncoding RunConfig::input() const {
  return {get_double("input.d_scale"), get_double("input.z_scale")};
}

LossConfig RunConfig::loss() const {
  LossConfig l;
  l.k = get_double("loss.k");
  l.w_box = get_double("loss.w_box");
  l.mean_vehicle_points = get_double("loss.mean_vehicle_points");
  return l;
}

AugmentConfig RunConfig::augment() const {
  AugmentConfig a;
  a.max_rotation = deg2rad(get_double("augment.max_rotation_deg"));
  a.max_translation_xy = get_double("augment.max_translation_xy");
  a.max_translation_z = get_double("augment.max_translation_z");
  a.validate();
  return a;
}

TrainConfig RunConfig::train() const {
  TrainConfig t;
  t.projection = projection();
  t.input = input();
  t.loss = loss();
  t.augment = augment();
  t.label_margin = get_double("labels.margin");
  t.canonical_heading = get_bool("labels.canonical_heading");
  t.iterations = get_int("train.iterations");
  t.learning_rate = get_double("train.learning_rate");
  t.momentum = get_double("train.momentum");
  t.lr_decay = get_double("train.lr_decay");
  t.lr_step = get_int("train.lr_step");
  t.clip_norm = get_double("train.clip_norm");
  t.divergence_threshold = get_double("train.divergence_threshold");
  t.seed = get_uint("train.seed");
  return t;
}

NmsConfig RunConfig::nms() const {
  NmsConfig n;
  n.delta = get_double("nms.delta");
  n.min_score = get_int("nms.min_score");
  n.margin = get_double("nms.margin");
  n.max_fit_residual = get_double("nms.max_fit_residual");
  n.validate();
  return n;
}

DetectorConfig RunConfig::detector() const { return {projection(), input(), nms()}; }

SceneConfig RunConfig::scene() const {
  SceneConfig s;
  s.min_vehicles = get_int("synth.min_vehicles");
  s.max_vehicles = get_int("synth.max_vehicles");
  s.min_distance = get_double("synth.min_distance");
  s.max_distance = get_double("synth.max_distance");
  s.length_min = get_double("synth.length_min");
  s.length_max = get_double("synth.length_max");
  s.width_min = get_double("synth.width_min");
  s.width_max = get_double("synth.width_max");
  s.height_min = get_double("synth.height_min");
  s.height_max = get_double("synth.height_max");
  s.min_gap = get_double("synth.min_gap");
  s.max_clutter = get_int("synth.max_clutter");
  s.z_ground = get_double("synth.z_ground");
  s.noise_std = get_double("synth.noise_std");
  s.max_range = get_double("synth.max_range");
  s.max_tries = get_int("synth.max_tries");
  s = s.with_window(projection());
  s.validate();
  return s;
}

SynthLabelConfig RunConfig::synth_labels() const {
  SynthLabelConfig c;
  c.min_visible_points = get_int("synth.min_visible_points");
  c.image_width = get_double("eval.image_width");
  c.image_height = get_double("eval.image_height");
  return c;
}

DifficultyConfig RunConfig::difficulty() const {
  DifficultyConfig d;
  d.easy_max_distance = get_double("eval.easy_distance");
  d.moderate_max_distance = get_double("eval.moderate_distance");
  d.easy_min_height_px = get_double("eval.easy_height_px");
  d.moderate_min_height_px = get_double("eval.moderate_height_px");
  return d;
}

std::optional<std::filesystem::path> default_config_path() {
  const char* env = std::getenv("LIDARFCN_CONFIG");
  if (env == nullptr || *env == '\0') return std::nullopt;
  return std::filesystem::path(env);
}

}  // namespace lfcn
