#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "gdf/evalkit.hpp"
#include "gdf/model_train.hpp"
#include "gdf/synthscene.hpp"

namespace gdf {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Every tunable of the pipeline. Text form is one `key = value` per line;
/// `#` starts a comment. Unknown keys are rejected.
struct RunConfig {
  std::uint64_t seed = 7;

  // synth
  int frames = 20;
  int width = 256;
  int height = 192;
  double focal = 200.0;
  double baseline = 0.12;
  int landmark_count = 3000;
  double brightness = 1.0;
  TrajectorySpec trajectory;

  // stage inputs
  std::filesystem::path dataset;     // synth output read by later stages
  std::string weights = "classical"; // checkpoint path, "classical" or "random"
  std::filesystem::path vo_dir;      // vo output read by label
  std::filesystem::path labels_dir;  // label output read by train
  std::filesystem::path checkpoint;  // trained weights read by compare

  ExtractorConfig extractor;
  VoConfig vo;
  SupervisionConfig supervision;
  TrainConfig train;
  int rounds = 3;
  int descriptor_dim = 64;
  std::uint64_t init_seed = 1;

  int eval_grid = 8;
  double repeatability_eps = 3.0;
  int repeatability_pairs = 8;
  std::uint64_t holdout_seed = 1007;

  CameraIntrinsics intrinsics() const;
  StereoRig rig() const;
  SceneSpec scene(std::uint64_t scene_seed) const;
  HomographyConfig homography() const;
  RoundConfig round_config() const;

  /// Numeric ranges; path existence is checked by the stage that reads them.
  void validate() const;
};

/// Parses `key = value` lines over the defaults. Relative paths are resolved
/// against `base_dir`.
RunConfig parse_run_config(const std::string& text, const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);
std::string format_run_config(const RunConfig& cfg);
std::vector<std::string> run_config_keys();

}  // namespace gdf
