#pragma once

#include <filesystem>
#include <vector>

#include "gdf/features.hpp"
#include "gdf/geometry.hpp"
#include "gdf/image.hpp"

namespace gdf {

struct CoverageReport {
  double occupancy_entropy = 0.0;        // normalized by log(G*G)
  double dynamic_region_fraction = 0.0;
  int keypoint_count = 0;
  bool empty = false;
};

/// Occupancy entropy of keypoints over a G x G partition of the image and the
/// share of keypoints that fall inside `region` (may be null).
CoverageReport coverage(const std::vector<Vec2>& keypoints, int width, int height, int grid = 8,
                        const BinaryMask* region = nullptr);

std::vector<Vec2> positions(const std::vector<Keypoint>& kps);

struct RepeatabilityResult {
  double value = 0.0;
  int counted = 0;       // keypoints whose mapping landed in the image
  bool defined = true;
};

/// Fraction of `a` mapped by h that has a keypoint of `b` within eps pixels.
RepeatabilityResult repeatability(const std::vector<Vec2>& a, const std::vector<Vec2>& b, const Homography& h,
                                  double eps, int width, int height);

/// Mean of both directions (b is mapped back through the inverse).
RepeatabilityResult symmetric_repeatability(const std::vector<Vec2>& a, const std::vector<Vec2>& b,
                                            const Homography& h, double eps, int width, int height);

struct TrajectoryError {
  double ate_rmse = 0.0;
  double rpe_trans = 0.0;  // meters per frame
  double rpe_rot = 0.0;    // degrees per frame
  int failure_count = 0;
};

/// Rigid alignment R, t minimizing sum |R est_i + t - gt_i|^2 (no scale).
PoseSE3 align_positions(const std::vector<Vec3>& est, const std::vector<Vec3>& gt);

TrajectoryError trajectory_error(const std::vector<PoseSE3>& est, const std::vector<PoseSE3>& gt,
                                 int failure_count = 0);

/// Writes the image as 8-bit PGM with a 5-pixel cross at full intensity on
/// every keypoint.
void render_overlay(const GrayImage& img, const std::vector<Vec2>& keypoints, const std::filesystem::path& path);

}  // namespace gdf
