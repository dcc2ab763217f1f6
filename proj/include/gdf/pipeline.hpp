#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "gdf/config.hpp"
#include "gdf/evalkit.hpp"
#include "gdf/matcher_vo.hpp"
#include "gdf/model_train.hpp"
#include "gdf/synthscene.hpp"

namespace gdf {

/// Raised when a stage cannot find what an earlier stage should have written.
class StageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// "classical" -> corner baseline, "random" -> untrained network from
/// init_seed, anything else is a checkpoint path.
std::unique_ptr<FeatureExtractor> make_extractor(const std::string& weights, const RunConfig& cfg);

SyntheticDataset synthesize(const RunConfig& cfg, std::uint64_t scene_seed);

struct ArmMetrics {
  std::string method;
  double entropy = 0.0;        // occupancy entropy of keypoints outside the dynamic region, frame mean
  double dyn_fraction = 0.0;   // frame mean
  double repeatability = 0.0;  // symmetric, mean over sampled homographies
  TrajectoryError trajectory;
  double mean_keypoints = 0.0;
};

/// Coverage over every frame, repeatability on `cfg.repeatability_pairs`
/// homographic pairs and VO trajectory error against ground truth.
ArmMetrics evaluate_arm(const std::string& method, const FeatureExtractor& extractor, const SyntheticDataset& ds,
                        const StereoRig& rig, const RunConfig& cfg);

std::string format_compare_table(const std::vector<ArmMetrics>& arms);

/// Refuses a non-empty `out` unless `force`; creates it otherwise.
void prepare_output(const std::filesystem::path& out, bool force);

// Each command writes into `out` and returns a short human-readable summary.
std::string cmd_synth(const RunConfig& cfg, const std::filesystem::path& out, bool force);
std::string cmd_vo(const RunConfig& cfg, const std::filesystem::path& out, bool force);
std::string cmd_label(const RunConfig& cfg, const std::filesystem::path& out, bool force);
std::string cmd_train(const RunConfig& cfg, const std::filesystem::path& out, bool force);
std::string cmd_eval(const RunConfig& cfg, const std::filesystem::path& out, bool force);
std::string cmd_compare(const RunConfig& cfg, const std::filesystem::path& out, bool force);

}  // namespace gdf
