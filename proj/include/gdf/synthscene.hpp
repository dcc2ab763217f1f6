#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "gdf/geometry.hpp"
#include "gdf/image.hpp"

namespace gdf {

/// Rectangle spanned by `edge_u` and `edge_v` from `origin` (world frame, meters).
/// The two edges must be orthogonal.
struct TexturedPlane {
  Vec3 origin = Vec3::Zero();
  Vec3 edge_u = Vec3::UnitX();
  Vec3 edge_v = Vec3::UnitY();
  double richness = 0.5;       // scales landmark blob density, in [0, 1]
  double feature_scale = 0.06; // blob sigma and noise wavelength unit, meters

  Vec3 normal() const { return edge_u.cross(edge_v).normalized(); }
};

struct SceneSpec {
  std::uint64_t seed = 1;
  std::vector<TexturedPlane> static_planes;
  TexturedPlane dynamic_region;
  int landmark_count = 3000;
  int width = 256;
  int height = 192;
  double brightness = 1.0;

  /// Canal-like layout: two side walls, a far backdrop and a water surface
  /// below the camera path. Geometry and textures vary with the seed.
  static SceneSpec canal(std::uint64_t seed, int width = 256, int height = 192);
  /// Throws std::invalid_argument on violated invariants.
  void validate() const;
};

struct TrajectorySpec {
  int frames = 20;
  double step = 0.1;              // meters per frame along the optical axis
  double yaw_amplitude_deg = 1.0;
  double lateral_amplitude = 0.05;
};

/// Camera-to-world poses of the left camera; frame 0 is the identity.
std::vector<PoseSE3> make_trajectory(const TrajectorySpec& spec);

struct DepthImage {
  int width = 0;
  int height = 0;
  std::vector<double> meters;  // 0 = no surface

  double at(int x, int y) const { return meters[static_cast<size_t>(y) * width + x]; }
  bool operator==(const DepthImage&) const = default;
};

struct SyntheticDataset {
  std::vector<GrayImage> left;
  std::vector<GrayImage> right;
  std::vector<PoseSE3> gt_poses;  // camera-to-world, left camera
  std::vector<DepthImage> gt_depth;
  std::vector<BinaryMask> gt_region_mask;
  /// Per-pixel surface index (-1 none); kept in memory only, reconstructed
  /// coarsely when a dataset is loaded from disk.
  std::vector<std::vector<std::int16_t>> surface_id;

  size_t size() const { return left.size(); }
};

class SceneConstructionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

SyntheticDataset render_sequence(const SceneSpec& spec, const std::vector<PoseSE3>& trajectory,
                                 const StereoRig& rig);

/// Ground-truth correspondence of `pix` (frame_i, left camera) in frame_j's left camera.
std::optional<Vec2> gt_correspondence(const SyntheticDataset& ds, size_t frame_i, const Vec2& pix,
                                      size_t frame_j, const StereoRig& rig);

/// Depth at a subpixel location: inverse depth is interpolated bilinearly when
/// the four neighbours share a surface, nearest-pixel depth otherwise.
double sample_depth(const SyntheticDataset& ds, size_t frame, const Vec2& pix);

/// Mean normalized cross-correlation of consecutive frames over pixels that are
/// dynamic in both frames.
double dynamic_region_ncc(const SyntheticDataset& ds);

struct StoredDataset {
  SyntheticDataset data;
  SceneSpec spec;
  StereoRig rig;
};

/// Writes left/, right/, depth/, mask/, gt_poses.csv and scene.cfg under `dir`.
void write_dataset(const std::filesystem::path& dir, const SyntheticDataset& ds,
                   const SceneSpec& spec, const StereoRig& rig);
StoredDataset read_dataset(const std::filesystem::path& dir);

}  // namespace gdf
