#pragma once

#include "lidarfcn/detector.hpp"
#include "lidarfcn/evalkit.hpp"
#include "lidarfcn/network.hpp"
#include "lidarfcn/synth.hpp"
#include "lidarfcn/trainer.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace lfcn {

enum class ValueType { Double, Int, UInt, Bool, String };

struct ConfigKey {
  std::string name;
  ValueType type;
  std::string default_value;
  std::string help;
};

/// Flat key = value settings covering every tunable default. Unknown keys and
/// values of the wrong type are rejected with ConfigError.
class RunConfig {
 public:
  RunConfig();

  static const std::vector<ConfigKey>& keys();

  void set(const std::string& key, const std::string& value);
  /// "key=value" as given on the command line.
  void set_assignment(const std::string& assignment);
  const std::string& get(const std::string& key) const;
  double get_double(const std::string& key) const;
  int get_int(const std::string& key) const;
  std::uint64_t get_uint(const std::string& key) const;
  bool get_bool(const std::string& key) const;

  /// `key = value` lines; blank lines and `#` comments are skipped.
  void merge_text(const std::string& text, const std::string& source = "config");
  void merge_file(const std::filesystem::path& path);

  std::string serialize() const;
  void write(const std::filesystem::path& path) const;

  ProjectionConfig projection() const;
  FcnOptions network() const;
  InputEncoding input() const;
  LossConfig loss() const;
  AugmentConfig augment() const;
  TrainConfig train() const;
  NmsConfig nms() const;
  DetectorConfig detector() const;
  SceneConfig scene() const;
  SynthLabelConfig synth_labels() const;
  DifficultyConfig difficulty() const;

 private:
  std::map<std::string, std::string> values_;
};

/// Value of LIDARFCN_CONFIG when set and non-empty.
std::optional<std::filesystem::path> default_config_path();

}  // namespace lfcn
