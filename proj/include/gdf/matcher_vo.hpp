#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "gdf/features.hpp"
#include "gdf/geometry.hpp"

namespace gdf {

struct Match {
  int idx_a = 0;
  int idx_b = 0;
  double similarity = 0.0;
  bool operator==(const Match&) const = default;
};

/// Restricts which (a, b) pairs may be compared; empty means all pairs.
using CandidateGate = std::function<bool(int, int)>;

/// Nearest-neighbour matching on unit descriptors with Lowe's ratio test in
/// Euclidean distance. With `mutual` set, a pair survives only if each side is
/// the other's best candidate and both directions pass the ratio test, which
/// makes the result symmetric in its inputs. Queries with fewer than two
/// candidates skip the ratio test. Output is ordered by idx_a.
std::vector<Match> match_descriptors(const std::vector<Keypoint>& a, const std::vector<Keypoint>& b,
                                     double ratio, bool mutual, const CandidateGate& gate = {});

struct StereoMatchConfig {
  double band = 1.0;
  double min_disparity = 0.5;
  double max_disparity = 64.0;
  double ratio = 0.9;
  bool mutual = true;
  int refine_half = 3;  // SSD patch half-size for subpixel disparity; 0 disables
  int refine_search = 2;
};

struct StereoMatch {
  Match match;
  std::optional<double> depth;  // empty for far points
  Vec2 right = Vec2::Zero();    // right-image position used for triangulation
};

/// Matches within the epipolar band at positive disparity, then triangulates.
/// When both images are supplied the right column is refined to subpixel
/// precision on the left keypoint's row by a parabola through patch SSD costs.
std::vector<StereoMatch> stereo_match(const std::vector<Keypoint>& left, const std::vector<Keypoint>& right,
                                      const StereoRig& rig, const StereoMatchConfig& cfg = {},
                                      const GrayImage* left_img = nullptr, const GrayImage* right_img = nullptr);

/// Subpixel right column for a left pixel; returns `right_x` unchanged when the
/// cost minimum is not interior to the search range.
double refine_disparity(const GrayImage& left_img, const GrayImage& right_img, int left_x, int left_y,
                        int right_x, int half, int search);

struct Correspondence3d2d {
  Vec3 point;     // frame a
  Vec2 observed;  // pixel in frame b
};

struct RansacConfig {
  int iterations = 300;
  double inlier_px = 2.0;
  int min_inliers = 12;
  std::uint64_t seed = 42;
  int max_refine_iterations = 50;
};

enum class PoseStatus { ok, too_few_points, degenerate };

struct PoseEstimate {
  PoseStatus status = PoseStatus::too_few_points;
  PoseSE3 pose;  // maps frame-a points into frame b
  std::vector<std::uint8_t> inliers;
  int inlier_count = 0;
  double minimal_rms = 0.0;  // RMS of the best minimal solve over its inliers
  double refined_rms = 0.0;  // RMS of the refined pose over the same inliers
};

/// Candidate poses (frame a -> camera) from three points and their unit bearings.
std::vector<PoseSE3> solve_p3p(const std::array<Vec3, 3>& points, const std::array<Vec3, 3>& bearings);

/// Gauss-Newton on SE(3) minimizing squared reprojection error with step halving.
/// Never increases the cost.
PoseSE3 refine_pose(const std::vector<Correspondence3d2d>& corr, const std::vector<std::uint8_t>& use,
                    const CameraIntrinsics& intr, const PoseSE3& initial, int max_iterations = 50);

double reprojection_rms(const std::vector<Correspondence3d2d>& corr, const std::vector<std::uint8_t>& use,
                        const CameraIntrinsics& intr, const PoseSE3& pose);

PoseEstimate estimate_relative_pose(const std::vector<Correspondence3d2d>& corr, const CameraIntrinsics& intr,
                                    const RansacConfig& cfg = {});

struct TrackObservation {
  int frame = 0;
  int keypoint = 0;  // index into that frame's keypoint list
  Vec2 left = Vec2::Zero();
  std::optional<Vec2> right;
  std::optional<double> depth;
};

struct Track {
  int id = 0;
  std::vector<TrackObservation> observations;
  std::vector<double> residuals;  // filled by score_tracks
};

struct VoConfig {
  StereoMatchConfig stereo;
  double temporal_ratio = 0.9;
  bool temporal_mutual = true;
  double temporal_window = 48.0;
  // Tighter than the estimator default: water texture inside 2 px biases the refit.
  RansacConfig ransac = [] {
    RansacConfig r;
    r.inlier_px = 1.5;
    return r;
  }();
};

struct VOResult {
  std::vector<PoseSE3> relative_poses;  // [t] maps frame-t points into frame t+1
  std::vector<Track> tracks;
  std::vector<int> inlier_counts;
  std::vector<std::uint8_t> failed;     // per pair
  std::vector<std::vector<Keypoint>> keypoints;  // left keypoints per frame

  /// Camera-to-world poses with frame 0 at `origin`.
  std::vector<PoseSE3> trajectory(const PoseSE3& origin = PoseSE3::identity()) const;
  int failure_count() const;
};

VOResult run_vo(const std::vector<GrayImage>& left, const std::vector<GrayImage>& right,
                const FeatureExtractor& extractor, const StereoRig& rig, const VoConfig& cfg = {});

/// tracks.csv: track_id,frame,x,y,right_x,depth (blank when unknown).
void write_tracks_csv(const std::filesystem::path& path, const std::vector<Track>& tracks);
std::vector<Track> read_tracks_csv(const std::filesystem::path& path);

}  // namespace gdf
