#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <array>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <vector>

#include "gdf/image.hpp"

namespace gdf {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Thrown for projective singularities (non-positive depth and similar).
class GeometryDomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Rigid motion x -> R x + t. The rotation is validated to be orthonormal
/// with det +1 at construction.
class PoseSE3 {
 public:
  PoseSE3() : rotation_(Mat3::Identity()), translation_(Vec3::Zero()) {}
  PoseSE3(const Mat3& rotation, const Vec3& translation);

  static PoseSE3 identity() { return {}; }
  /// Exponential-style constructor: rotation vector (axis * angle, radians) and translation.
  static PoseSE3 from_rotation_vector(const Vec3& rotvec, const Vec3& translation);
  /// Quaternion in Hamilton convention; normalized before use.
  static PoseSE3 from_quaternion(const Eigen::Quaterniond& q, const Vec3& translation);

  const Mat3& rotation() const { return rotation_; }
  const Vec3& translation() const { return translation_; }
  Eigen::Quaterniond quaternion() const;

  double rotation_angle() const;

 private:
  Mat3 rotation_;
  Vec3 translation_;
};

PoseSE3 compose(const PoseSE3& a, const PoseSE3& b);
PoseSE3 inverse(const PoseSE3& p);
Vec3 transform(const PoseSE3& p, const Vec3& x);
/// Largest absolute entry difference of the 3x4 matrices.
double max_abs_difference(const PoseSE3& a, const PoseSE3& b);

struct CameraIntrinsics {
  double fx = 200.0;
  double fy = 200.0;
  double cx = 128.0;
  double cy = 96.0;
  int width = 256;
  int height = 192;

  /// Throws std::invalid_argument when the invariants do not hold.
  void validate() const;
  bool in_image(const Vec2& pix) const {
    return pix.x() >= 0.0 && pix.y() >= 0.0 && pix.x() <= width - 1.0 && pix.y() <= height - 1.0;
  }
};

/// Rectified stereo pair: both cameras share intrinsics and the right camera
/// sits `baseline` meters along +x of the left one.
struct StereoRig {
  CameraIntrinsics left;
  CameraIntrinsics right;
  PoseSE3 extrinsic;  // left -> right
  double baseline = 0.12;

  static StereoRig rectified(const CameraIntrinsics& intr, double baseline);
  void validate() const;
};

Vec2 project(const CameraIntrinsics& intr, const Vec3& p);
Vec3 unproject(const CameraIntrinsics& intr, const Vec2& pix, double depth);

struct StereoGate {
  double min_disparity = 0.5;
  double epipolar_band = 1.0;
};

enum class StereoStatus { ok, far_point, epipolar_violation };

struct Triangulation {
  StereoStatus status = StereoStatus::ok;
  Vec3 point = Vec3::Zero();  // left camera frame
  double depth = 0.0;
  bool ok() const { return status == StereoStatus::ok; }
};

Triangulation triangulate_rectified(const StereoRig& rig, const Vec2& left_pix,
                                    const Vec2& right_pix, const StereoGate& gate = {});

struct Residual {
  Vec2 value = Vec2::Zero();
  bool behind_camera = false;
};

/// project(transform(pose_a_to_b, point_in_a)) - observed_in_b.
Residual reprojection_residual(const CameraIntrinsics& intr, const PoseSE3& pose_a_to_b,
                               const Vec3& point_in_a, const Vec2& observed_in_b);

/// Planar projective map between image I and its warped copy I'.
class Homography {
 public:
  Homography() : h_(Mat3::Identity()) {}
  explicit Homography(const Mat3& h);

  static Homography translation(double dx, double dy);
  const Mat3& matrix() const { return h_; }
  Homography inverse() const { return Homography(h_.inverse()); }
  Vec2 apply(const Vec2& p) const;

 private:
  Mat3 h_;
};

inline Vec2 apply_homography(const Homography& h, const Vec2& p) { return h.apply(p); }

/// Solves the homography taking src[i] to dst[i] (four correspondences).
Homography homography_from_points(const std::array<Vec2, 4>& src, const std::array<Vec2, 4>& dst);

struct HomographyConfig {
  int width = 256;
  int height = 192;
  double scale_amplitude = 0.2;      // scale in [1 - a, 1 + a]
  double rotation_deg = 15.0;        // in-plane rotation in [-r, r]
  double translation_fraction = 0.1; // shift in [-f, f] * image size
  double perspective_fraction = 0.05;// corner jitter in [-f, f] * image size

  void validate() const;
};

Homography sample_homography(const HomographyConfig& cfg, std::uint64_t seed);

struct WarpResult {
  GrayImage image;
  BinaryMask valid;
};

/// Inverse warp with bilinear sampling: output(p) = input(h^-1 p).
WarpResult warp_image(const GrayImage& img, const Homography& h);

struct TimedPose {
  double timestamp = 0.0;
  PoseSE3 pose;  // camera-to-world
};

void write_trajectory_csv(const std::filesystem::path& path, const std::vector<TimedPose>& traj);
std::vector<TimedPose> read_trajectory_csv(const std::filesystem::path& path);

}  // namespace gdf
