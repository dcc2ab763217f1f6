#include "gdf/evalkit.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace gdf {

CoverageReport coverage(const std::vector<Vec2>& keypoints, int width, int height, int grid, const BinaryMask* region) {
  if (grid < 2) throw std::invalid_argument("coverage: grid must be >= 2");
  if (width <= 0 || height <= 0) throw std::invalid_argument("coverage: empty image");
  CoverageReport r;
  r.keypoint_count = static_cast<int>(keypoints.size());
  if (keypoints.empty()) {
    r.empty = true;
    return r;
  }
  std::vector<int> counts(static_cast<size_t>(grid) * grid, 0);
  int inside = 0;
  for (const Vec2& p : keypoints) {
    const int gx = std::clamp(static_cast<int>(std::floor(p.x() * grid / width)), 0, grid - 1);
    const int gy = std::clamp(static_cast<int>(std::floor(p.y() * grid / height)), 0, grid - 1);
    ++counts[static_cast<size_t>(gy) * grid + gx];
    if (region) {
      const int x = static_cast<int>(std::lround(p.x())), y = static_cast<int>(std::lround(p.y()));
      if (x >= 0 && y >= 0 && x < region->width && y < region->height && region->at(x, y)) ++inside;
    }
  }
  const auto n = static_cast<double>(keypoints.size());
  double h = 0.0;
  for (int c : counts) {
    if (c > 0) h -= (c / n) * std::log(c / n);
  }
  r.occupancy_entropy = std::clamp(h / std::log(static_cast<double>(grid) * grid), 0.0, 1.0);
  r.dynamic_region_fraction = inside / n;
  return r;
}

std::vector<Vec2> positions(const std::vector<Keypoint>& kps) {
  std::vector<Vec2> out;
  out.reserve(kps.size());
  for (const Keypoint& k : kps) out.emplace_back(k.x, k.y);
  return out;
}

RepeatabilityResult repeatability(const std::vector<Vec2>& a, const std::vector<Vec2>& b, const Homography& h,
                                  double eps, int width, int height) {
  if (!(eps > 0.0)) throw std::invalid_argument("repeatability: eps must be positive");
  RepeatabilityResult r;
  int hits = 0;
  const double eps2 = eps * eps;
  for (const Vec2& p : a) {
    const Vec2 q = h.apply(p);
    if (q.x() < 0.0 || q.y() < 0.0 || q.x() > width - 1.0 || q.y() > height - 1.0) continue;
    ++r.counted;
    for (const Vec2& c : b) {
      if ((c - q).squaredNorm() <= eps2) {
        ++hits;
        break;
      }
    }
  }
  if (r.counted == 0) {
    r.defined = false;
    return r;
  }
  r.value = static_cast<double>(hits) / r.counted;
  return r;
}

RepeatabilityResult symmetric_repeatability(const std::vector<Vec2>& a, const std::vector<Vec2>& b,
                                            const Homography& h, double eps, int width, int height) {
  const RepeatabilityResult ab = repeatability(a, b, h, eps, width, height);
  const RepeatabilityResult ba = repeatability(b, a, h.inverse(), eps, width, height);
  RepeatabilityResult r;
  r.counted = ab.counted + ba.counted;
  if (!ab.defined || !ba.defined) {
    r.defined = false;
    return r;
  }
  r.value = 0.5 * (ab.value + ba.value);
  return r;
}

PoseSE3 align_positions(const std::vector<Vec3>& est, const std::vector<Vec3>& gt) {
  if (est.size() != gt.size() || est.empty()) throw std::invalid_argument("align_positions: size mismatch");
  Vec3 me = Vec3::Zero(), mg = Vec3::Zero();
  for (size_t i = 0; i < est.size(); ++i) {
    me += est[i];
    mg += gt[i];
  }
  me /= static_cast<double>(est.size());
  mg /= static_cast<double>(est.size());
  Mat3 cov = Mat3::Zero();
  for (size_t i = 0; i < est.size(); ++i) cov += (gt[i] - mg) * (est[i] - me).transpose();
  const Eigen::JacobiSVD<Mat3> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 d = Mat3::Identity();
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0) d(2, 2) = -1.0;
  const Mat3 r = svd.matrixU() * d * svd.matrixV().transpose();
  return PoseSE3(r, mg - r * me);
}

TrajectoryError trajectory_error(const std::vector<PoseSE3>& est, const std::vector<PoseSE3>& gt, int failure_count) {
  if (est.size() != gt.size()) throw std::invalid_argument("trajectory_error: trajectories differ in length");
  if (est.size() < 2) throw std::invalid_argument("trajectory_error: need at least two poses");
  TrajectoryError e;
  e.failure_count = failure_count;
  std::vector<Vec3> pe, pg;
  for (size_t i = 0; i < est.size(); ++i) {
    pe.push_back(est[i].translation());
    pg.push_back(gt[i].translation());
  }
  const PoseSE3 align = align_positions(pe, pg);
  double se = 0.0;
  for (size_t i = 0; i < pe.size(); ++i) se += (transform(align, pe[i]) - pg[i]).squaredNorm();
  e.ate_rmse = std::sqrt(se / static_cast<double>(pe.size()));
  for (size_t i = 0; i + 1 < est.size(); ++i) {
    const PoseSE3 rel_e = compose(inverse(est[i]), est[i + 1]);
    const PoseSE3 rel_g = compose(inverse(gt[i]), gt[i + 1]);
    const PoseSE3 err = compose(inverse(rel_g), rel_e);
    e.rpe_trans += err.translation().norm();
    e.rpe_rot += err.rotation_angle() * 180.0 / M_PI;
  }
  e.rpe_trans /= static_cast<double>(est.size() - 1);
  e.rpe_rot /= static_cast<double>(est.size() - 1);
  return e;
}

void render_overlay(const GrayImage& img, const std::vector<Vec2>& keypoints, const std::filesystem::path& path) {
  GrayImage out = img;
  for (const Vec2& p : keypoints) {
    const int x = static_cast<int>(std::lround(p.x())), y = static_cast<int>(std::lround(p.y()));
    for (const auto& [dx, dy] : {std::pair{0, 0}, {1, 0}, {-1, 0}, {0, 1}, {0, -1}}) {
      if (out.contains(x + dx, y + dy)) out.pixels[static_cast<size_t>(y + dy) * out.width + (x + dx)] = 1.0f;
    }
  }
  write_pgm8(path, out);
}

}  // namespace gdf
