#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "gdf/features.hpp"
#include "gdf/geometry.hpp"
#include "gdf/matcher_vo.hpp"

namespace gdf {

/// Per-cell detector targets. Labels 0..63 are the keypoint offset inside the
/// 8x8 cell (row-major), 64 is the dustbin. Cells with `supervised` cleared are
/// left out of the detector loss.
struct LabelGrid {
  int hc = 0;
  int wc = 0;
  std::vector<int> labels;
  std::vector<std::uint8_t> supervised;

  LabelGrid() = default;
  LabelGrid(int hc_, int wc_)
      : hc(hc_), wc(wc_), labels(static_cast<size_t>(hc_) * wc_, kDustbin),
        supervised(static_cast<size_t>(hc_) * wc_, 1) {}
  int cells() const { return hc * wc; }
  int& at(int r, int c) { return labels[static_cast<size_t>(r) * wc + c]; }
  int at(int r, int c) const { return labels[static_cast<size_t>(r) * wc + c]; }
  bool operator==(const LabelGrid&) const = default;
};

enum class Verdict { good, bad, undecided };

const char* verdict_name(Verdict v);

struct GoodFeatureVerdict {
  int track_id = 0;
  Verdict verdict = Verdict::undecided;
  std::optional<double> mean_residual;  // empty when no pair could be evaluated
  int track_length = 0;
  bool stereo_consistent = true;
  bool behind_camera = false;
};

struct SupervisionConfig {
  double tau_px = 1.0;
  int min_length = 3;
  double stereo_tau = 1.0;
  double eps_cell = 8.0;

  void validate() const;
};

/// Reprojection residuals of every track under the VO relative poses and the
/// resulting verdicts, one per track in input order. Fills `Track::residuals`.
/// Pairs spanning a failed VO step are not evaluated.
std::vector<GoodFeatureVerdict> score_tracks(VOResult& vo, const StereoRig& rig, const SupervisionConfig& cfg = {});

struct LabeledPoint {
  int x = 0;
  int y = 0;
  double residual = 0.0;
};

/// Good keypoints become offset labels; on collision the smaller residual wins,
/// then the smaller (y, x). Every other cell is dustbin.
LabelGrid build_label_grid(const std::vector<LabeledPoint>& good, int width, int height);

/// Clears `supervised` on dustbin cells holding an undecided keypoint.
void mask_undecided(LabelGrid& grid, const std::vector<Vec2>& undecided);

/// Label grid of one frame from track verdicts.
LabelGrid frame_label_grid(const VOResult& vo, const std::vector<GoodFeatureVerdict>& verdicts, int frame,
                           int width, int height);

struct WarpedPair {
  GrayImage image;
  LabelGrid grid;
  std::vector<std::uint8_t> valid;  // per cell of the warped image
};

WarpedPair make_warped_pair(const GrayImage& img, const LabelGrid& grid, const Homography& h);

/// Binary cell correspondence between an image and its warp. Each source cell
/// pairs with at most one target cell: the one whose center is nearest to the
/// mapped source center, provided it lies within eps.
struct CorrespondenceMatrix {
  int hc = 0;
  int wc = 0;
  std::vector<int> partner;               // target cell per source cell, -1 if none
  std::vector<std::uint8_t> valid_source;  // source center maps inside the target image
  std::vector<std::uint8_t> valid_target;  // target cell lies fully inside the warp support

  int cells() const { return hc * wc; }
  bool s(int c, int c2) const { return partner[static_cast<size_t>(c)] == c2; }
};

CorrespondenceMatrix build_correspondence_matrix(const Homography& h, int width, int height, double eps_cell);

void write_label_grid_csv(const std::filesystem::path& path, const LabelGrid& grid);
LabelGrid read_label_grid_csv(const std::filesystem::path& path, int hc, int wc);
void write_verdicts_csv(const std::filesystem::path& path, const std::vector<GoodFeatureVerdict>& verdicts);
std::vector<GoodFeatureVerdict> read_verdicts_csv(const std::filesystem::path& path);

}  // namespace gdf
