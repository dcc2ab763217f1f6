#include "gdf/geometry.hpp"

#include <Eigen/LU>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>
#include <string>

namespace gdf {

namespace {
constexpr double kRotationTolerance = 1e-9;
constexpr double kPi = 3.14159265358979323846;
}  // namespace

PoseSE3::PoseSE3(const Mat3& rotation, const Vec3& translation)
    : rotation_(rotation), translation_(translation) {
  const double ortho = (rotation.transpose() * rotation - Mat3::Identity()).norm();
  if (!(ortho < kRotationTolerance) || rotation.determinant() <= 0.0 || !translation.allFinite()) {
    throw std::invalid_argument("PoseSE3: rotation is not a proper orthonormal matrix");
  }
}

PoseSE3 PoseSE3::from_rotation_vector(const Vec3& rotvec, const Vec3& translation) {
  const double angle = rotvec.norm();
  if (angle < 1e-300) return PoseSE3(Mat3::Identity(), translation);
  return PoseSE3(Eigen::AngleAxisd(angle, rotvec / angle).toRotationMatrix(), translation);
}

PoseSE3 PoseSE3::from_quaternion(const Eigen::Quaterniond& q, const Vec3& translation) {
  return PoseSE3(q.normalized().toRotationMatrix(), translation);
}

Eigen::Quaterniond PoseSE3::quaternion() const {
  Eigen::Quaterniond q(rotation_);
  q.normalize();
  if (q.w() < 0.0) q.coeffs() *= -1.0;
  return q;
}

double PoseSE3::rotation_angle() const {
  const double c = std::clamp((rotation_.trace() - 1.0) * 0.5, -1.0, 1.0);
  return std::acos(c);
}

PoseSE3 compose(const PoseSE3& a, const PoseSE3& b) {
  return PoseSE3(a.rotation() * b.rotation(), a.rotation() * b.translation() + a.translation());
}

PoseSE3 inverse(const PoseSE3& p) {
  const Mat3 rt = p.rotation().transpose();
  return PoseSE3(rt, -(rt * p.translation()));
}

Vec3 transform(const PoseSE3& p, const Vec3& x) { return p.rotation() * x + p.translation(); }

double max_abs_difference(const PoseSE3& a, const PoseSE3& b) {
  return std::max((a.rotation() - b.rotation()).cwiseAbs().maxCoeff(),
                  (a.translation() - b.translation()).cwiseAbs().maxCoeff());
}

void CameraIntrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) throw std::invalid_argument("intrinsics: focal lengths must be positive");
  if (width <= 0 || height <= 0) throw std::invalid_argument("intrinsics: image size must be positive");
  if (!(cx >= 0.0 && cx < width) || !(cy >= 0.0 && cy < height)) {
    throw std::invalid_argument("intrinsics: principal point outside the image");
  }
}

StereoRig StereoRig::rectified(const CameraIntrinsics& intr, double baseline) {
  StereoRig rig;
  rig.left = intr;
  rig.right = intr;
  rig.baseline = baseline;
  rig.extrinsic = PoseSE3(Mat3::Identity(), Vec3(-baseline, 0.0, 0.0));
  rig.validate();
  return rig;
}

void StereoRig::validate() const {
  left.validate();
  right.validate();
  if (!(baseline > 0.0)) throw std::invalid_argument("stereo rig: baseline must be positive");
  if (std::abs(extrinsic.translation().norm() - baseline) > 1e-9) {
    throw std::invalid_argument("stereo rig: baseline disagrees with extrinsic translation");
  }
}

Vec2 project(const CameraIntrinsics& intr, const Vec3& p) {
  if (!(p.z() > 1e-9)) {
    std::ostringstream msg;
    msg << "project: non-positive depth for point (" << p.x() << ", " << p.y() << ", " << p.z() << ")";
    throw GeometryDomainError(msg.str());
  }
  return {intr.fx * p.x() / p.z() + intr.cx, intr.fy * p.y() / p.z() + intr.cy};
}

Vec3 unproject(const CameraIntrinsics& intr, const Vec2& pix, double depth) {
  if (!(depth > 0.0)) throw GeometryDomainError("unproject: depth must be positive");
  return {(pix.x() - intr.cx) / intr.fx * depth, (pix.y() - intr.cy) / intr.fy * depth, depth};
}

Triangulation triangulate_rectified(const StereoRig& rig, const Vec2& left_pix, const Vec2& right_pix,
                                    const StereoGate& gate) {
  Triangulation tri;
  if (std::abs(left_pix.y() - right_pix.y()) > gate.epipolar_band) {
    tri.status = StereoStatus::epipolar_violation;
    return tri;
  }
  const double disparity = left_pix.x() - right_pix.x();
  if (!(disparity > gate.min_disparity)) {
    tri.status = StereoStatus::far_point;
    return tri;
  }
  tri.depth = rig.left.fx * rig.baseline / disparity;
  tri.point = unproject(rig.left, left_pix, tri.depth);
  return tri;
}

Residual reprojection_residual(const CameraIntrinsics& intr, const PoseSE3& pose_a_to_b,
                               const Vec3& point_in_a, const Vec2& observed_in_b) {
  Residual r;
  const Vec3 pb = transform(pose_a_to_b, point_in_a);
  if (!(pb.z() > 1e-9)) {
    r.behind_camera = true;
    return r;
  }
  r.value = project(intr, pb) - observed_in_b;
  return r;
}

Homography::Homography(const Mat3& h) {
  if (!h.allFinite() || std::abs(h(2, 2)) < 1e-12) {
    throw std::invalid_argument("homography: cannot normalize h[2][2] to 1");
  }
  h_ = h / h(2, 2);
  if (!(std::abs(h_.determinant()) > 1e-9)) throw std::invalid_argument("homography: singular matrix");
}

Homography Homography::translation(double dx, double dy) {
  Mat3 h = Mat3::Identity();
  h(0, 2) = dx;
  h(1, 2) = dy;
  return Homography(h);
}

Vec2 Homography::apply(const Vec2& p) const {
  const Vec3 q = h_ * Vec3(p.x(), p.y(), 1.0);
  return {q.x() / q.z(), q.y() / q.z()};
}

Homography homography_from_points(const std::array<Vec2, 4>& src, const std::array<Vec2, 4>& dst) {
  Eigen::Matrix<double, 8, 8> a;
  Eigen::Matrix<double, 8, 1> b;
  for (int i = 0; i < 4; ++i) {
    const double x = src[i].x(), y = src[i].y(), u = dst[i].x(), v = dst[i].y();
    a.row(2 * i) << x, y, 1, 0, 0, 0, -u * x, -u * y;
    a.row(2 * i + 1) << 0, 0, 0, x, y, 1, -v * x, -v * y;
    b(2 * i) = u;
    b(2 * i + 1) = v;
  }
  const Eigen::Matrix<double, 8, 1> sol = a.fullPivLu().solve(b);
  Mat3 h;
  h << sol(0), sol(1), sol(2), sol(3), sol(4), sol(5), sol(6), sol(7), 1.0;
  return Homography(h);
}

void HomographyConfig::validate() const {
  if (width <= 0 || height <= 0) throw std::invalid_argument("homography config: bad image size");
  if (scale_amplitude < 0.0 || scale_amplitude >= 1.0) {
    throw std::invalid_argument("homography config: scale amplitude must be in [0, 1)");
  }
  if (rotation_deg < 0.0 || rotation_deg > 90.0) {
    throw std::invalid_argument("homography config: rotation must be in [0, 90] degrees");
  }
  if (translation_fraction < 0.0 || translation_fraction > 0.5 || perspective_fraction < 0.0 ||
      perspective_fraction > 0.25) {
    throw std::invalid_argument("homography config: translation/perspective fraction out of range");
  }
}

Homography sample_homography(const HomographyConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  const double scale = 1.0 + cfg.scale_amplitude * unit(rng);
  const double angle = cfg.rotation_deg * kPi / 180.0 * unit(rng);
  const Vec2 shift(cfg.translation_fraction * cfg.width * unit(rng),
                   cfg.translation_fraction * cfg.height * unit(rng));
  const Vec2 center((cfg.width - 1) * 0.5, (cfg.height - 1) * 0.5);
  const Eigen::Rotation2Dd rot(angle);

  const std::array<Vec2, 4> corners = {Vec2(0.0, 0.0), Vec2(cfg.width - 1.0, 0.0),
                                       Vec2(cfg.width - 1.0, cfg.height - 1.0),
                                       Vec2(0.0, cfg.height - 1.0)};
  std::array<Vec2, 4> moved;
  for (int i = 0; i < 4; ++i) {
    const Vec2 jitter(cfg.perspective_fraction * cfg.width * unit(rng),
                      cfg.perspective_fraction * cfg.height * unit(rng));
    moved[i] = center + scale * (rot * (corners[i] - center)) + shift + jitter;
  }
  return homography_from_points(corners, moved);
}

WarpResult warp_image(const GrayImage& img, const Homography& h) {
  const Homography inv = h.inverse();
  WarpResult out{GrayImage(img.width, img.height), BinaryMask(img.width, img.height)};
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const Vec2 src = inv.apply(Vec2(x, y));
      if (!src.allFinite() || !img.contains(src.x(), src.y())) continue;
      out.image.at(x, y) = sample_bilinear(img, src.x(), src.y());
      out.valid.at(x, y) = 1;
    }
  }
  return out;
}

void write_trajectory_csv(const std::filesystem::path& path, const std::vector<TimedPose>& traj) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << "timestamp,tx,ty,tz,qx,qy,qz,qw\n";
  out << std::setprecision(17);
  for (const auto& tp : traj) {
    const auto q = tp.pose.quaternion();
    const Vec3& t = tp.pose.translation();
    out << tp.timestamp << ',' << t.x() << ',' << t.y() << ',' << t.z() << ',' << q.x() << ','
        << q.y() << ',' << q.z() << ',' << q.w() << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

std::vector<TimedPose> read_trajectory_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open for reading: " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "timestamp,tx,ty,tz,qx,qy,qz,qw") {
    throw IoError("trajectory CSV: missing or unexpected header in " + path.string());
  }
  std::vector<TimedPose> traj;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::array<double, 8> v{};
    for (int i = 0; i < 8; ++i) {
      std::string field;
      if (!std::getline(ss, field, ',')) throw IoError("trajectory CSV: short row in " + path.string());
      v[i] = std::stod(field);
    }
    const Eigen::Quaterniond q(v[7], v[4], v[5], v[6]);
    traj.push_back({v[0], PoseSE3::from_quaternion(q, Vec3(v[1], v[2], v[3]))});
  }
  return traj;
}

}  // namespace gdf
