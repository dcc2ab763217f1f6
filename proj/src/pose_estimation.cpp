#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <random>

#include "gdf/matcher_vo.hpp"

namespace gdf {

namespace {

// Rigid transform taking p[i] onto q[i] (least squares, no scale).
std::optional<PoseSE3> align_points(const std::array<Vec3, 3>& p, const std::array<Vec3, 3>& q) {
  const Vec3 pc = (p[0] + p[1] + p[2]) / 3.0;
  const Vec3 qc = (q[0] + q[1] + q[2]) / 3.0;
  Mat3 cov = Mat3::Zero();
  for (int i = 0; i < 3; ++i) cov += (q[i] - qc) * (p[i] - pc).transpose();
  const Eigen::JacobiSVD<Mat3> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 d = Mat3::Identity();
  d(2, 2) = (svd.matrixU() * svd.matrixV().transpose()).determinant() < 0 ? -1.0 : 1.0;
  Mat3 r = svd.matrixU() * d * svd.matrixV().transpose();
  // Re-orthonormalize to keep PoseSE3's tolerance satisfied.
  const Eigen::JacobiSVD<Mat3> clean(r, Eigen::ComputeFullU | Eigen::ComputeFullV);
  r = clean.matrixU() * clean.matrixV().transpose();
  if (!r.allFinite() || r.determinant() <= 0.0) return std::nullopt;
  return PoseSE3(r, qc - r * pc);
}

std::vector<double> real_quartic_roots(const std::array<double, 5>& c) {
  // c[0] v^4 + c[1] v^3 + c[2] v^2 + c[3] v + c[4]
  std::vector<double> roots;
  if (std::abs(c[0]) < 1e-14 * (std::abs(c[1]) + std::abs(c[2]) + std::abs(c[3]) + std::abs(c[4]) + 1e-300)) {
    return roots;
  }
  Eigen::Matrix4d companion = Eigen::Matrix4d::Zero();
  for (int i = 0; i < 4; ++i) companion(0, i) = -c[static_cast<size_t>(i + 1)] / c[0];
  companion(1, 0) = companion(2, 1) = companion(3, 2) = 1.0;
  const Eigen::EigenSolver<Eigen::Matrix4d> es(companion, false);
  auto poly = [&](double v) { return (((c[0] * v + c[1]) * v + c[2]) * v + c[3]) * v + c[4]; };
  auto dpoly = [&](double v) { return ((4 * c[0] * v + 3 * c[1]) * v + 2 * c[2]) * v + c[3]; };
  for (int i = 0; i < 4; ++i) {
    const auto ev = es.eigenvalues()(i);
    if (std::abs(ev.imag()) > 1e-6 * std::max(1.0, std::abs(ev.real()))) continue;
    double v = ev.real();
    for (int it = 0; it < 5; ++it) {
      const double d = dpoly(v);
      if (std::abs(d) < 1e-300) break;
      v -= poly(v) / d;
    }
    roots.push_back(v);
  }
  return roots;
}

}  // namespace

std::vector<PoseSE3> solve_p3p(const std::array<Vec3, 3>& points, const std::array<Vec3, 3>& bearings) {
  std::vector<PoseSE3> out;
  const double a2 = (points[1] - points[2]).squaredNorm();
  const double b2 = (points[0] - points[2]).squaredNorm();
  const double c2 = (points[0] - points[1]).squaredNorm();
  if (a2 < 1e-18 || b2 < 1e-18 || c2 < 1e-18) return out;
  const Vec3 j1 = bearings[0].normalized(), j2 = bearings[1].normalized(), j3 = bearings[2].normalized();
  const double ca = j2.dot(j3), cb = j1.dot(j3), cg = j1.dot(j2);

  // Grunert's quartic in v = s3 / s1 with u = s2 / s1.
  const double amc = (a2 - c2) / b2;
  const double apc = (a2 + c2) / b2;
  const std::array<double, 5> coeff = {
      (amc - 1) * (amc - 1) - 4 * c2 / b2 * ca * ca,
      4 * (amc * (1 - amc) * cb - (1 - apc) * ca * cg + 2 * c2 / b2 * ca * ca * cb),
      2 * (amc * amc - 1 + 2 * amc * amc * cb * cb + 2 * (b2 - c2) / b2 * ca * ca - 4 * apc * ca * cb * cg +
           2 * (b2 - a2) / b2 * cg * cg),
      4 * (-amc * (1 + amc) * cb + 2 * a2 / b2 * cg * cg * cb - (1 - apc) * ca * cg),
      (1 + amc) * (1 + amc) - 4 * a2 / b2 * cg * cg};

  for (double v : real_quartic_roots(coeff)) {
    const double denom = 2 * (cg - v * ca);
    if (std::abs(denom) < 1e-12) continue;
    const double u = ((-1 + amc) * v * v - 2 * amc * cb * v + 1 + amc) / denom;
    const double q = 1 + u * u - 2 * u * cg;
    if (!(q > 0.0)) continue;
    Vec3 s(std::sqrt(c2 / q), 0.0, 0.0);
    s(1) = u * s(0);
    s(2) = v * s(0);
    if (s(0) <= 0 || s(1) <= 0 || s(2) <= 0) continue;
    // Polish the distances on the three law-of-cosines equations.
    for (int it = 0; it < 4; ++it) {
      const Vec3 f(s(1) * s(1) + s(2) * s(2) - 2 * s(1) * s(2) * ca - a2,
                   s(0) * s(0) + s(2) * s(2) - 2 * s(0) * s(2) * cb - b2,
                   s(0) * s(0) + s(1) * s(1) - 2 * s(0) * s(1) * cg - c2);
      Mat3 jac;
      jac << 0, 2 * s(1) - 2 * s(2) * ca, 2 * s(2) - 2 * s(1) * ca,
             2 * s(0) - 2 * s(2) * cb, 0, 2 * s(2) - 2 * s(0) * cb,
             2 * s(0) - 2 * s(1) * cg, 2 * s(1) - 2 * s(0) * cg, 0;
      const Vec3 step = jac.fullPivLu().solve(f);
      if (!step.allFinite()) break;
      s -= step;
    }
    if (!s.allFinite() || s.minCoeff() <= 0) continue;
    const std::array<Vec3, 3> cam = {s(0) * j1, s(1) * j2, s(2) * j3};
    if (auto pose = align_points(points, cam)) out.push_back(*pose);
  }
  return out;
}

double reprojection_rms(const std::vector<Correspondence3d2d>& corr, const std::vector<std::uint8_t>& use,
                        const CameraIntrinsics& intr, const PoseSE3& pose) {
  double sum = 0.0;
  int n = 0;
  for (size_t i = 0; i < corr.size(); ++i) {
    if (!use[i]) continue;
    const Residual r = reprojection_residual(intr, pose, corr[i].point, corr[i].observed);
    if (r.behind_camera) return std::numeric_limits<double>::infinity();
    sum += r.value.squaredNorm();
    ++n;
  }
  return n > 0 ? std::sqrt(sum / n) : 0.0;
}

PoseSE3 refine_pose(const std::vector<Correspondence3d2d>& corr, const std::vector<std::uint8_t>& use,
                    const CameraIntrinsics& intr, const PoseSE3& initial, int max_iterations) {
  PoseSE3 pose = initial;
  double cost = reprojection_rms(corr, use, intr, pose);
  if (!std::isfinite(cost)) return pose;
  using Mat6 = Eigen::Matrix<double, 6, 6>;
  using Vec6 = Eigen::Matrix<double, 6, 1>;
  for (int iter = 0; iter < max_iterations; ++iter) {
    Mat6 h = Mat6::Zero();
    Vec6 g = Vec6::Zero();
    for (size_t i = 0; i < corr.size(); ++i) {
      if (!use[i]) continue;
      const Vec3 p = transform(pose, corr[i].point);
      const double iz = 1.0 / p.z();
      const Vec2 r = Vec2(intr.fx * p.x() * iz + intr.cx, intr.fy * p.y() * iz + intr.cy) - corr[i].observed;
      Eigen::Matrix<double, 2, 3> jp;
      jp << intr.fx * iz, 0, -intr.fx * p.x() * iz * iz, 0, intr.fy * iz, -intr.fy * p.y() * iz * iz;
      Eigen::Matrix<double, 3, 6> dp;
      dp.leftCols<3>() = Mat3::Identity();
      dp.rightCols<3>() << 0, p.z(), -p.y(), -p.z(), 0, p.x(), p.y(), -p.x(), 0;
      const Eigen::Matrix<double, 2, 6> j = jp * dp;
      h += j.transpose() * j;
      g += j.transpose() * r;
    }
    const Vec6 delta = -h.ldlt().solve(g);
    if (!delta.allFinite() || delta.norm() < 1e-10) break;
    double alpha = 1.0;
    bool accepted = false;
    for (int halving = 0; halving < 30; ++halving, alpha *= 0.5) {
      const Vec6 step = alpha * delta;
      const PoseSE3 update = PoseSE3::from_rotation_vector(step.tail<3>(), step.head<3>());
      const PoseSE3 candidate = compose(update, pose);
      const double c = reprojection_rms(corr, use, intr, candidate);
      if (c < cost) {
        pose = candidate;
        cost = c;
        accepted = true;
        break;
      }
      if (step.norm() < 1e-10) break;
    }
    if (!accepted) break;
  }
  return pose;
}

PoseEstimate estimate_relative_pose(const std::vector<Correspondence3d2d>& corr, const CameraIntrinsics& intr,
                                    const RansacConfig& cfg) {
  PoseEstimate est;
  const int n = static_cast<int>(corr.size());
  est.inliers.assign(corr.size(), 0);
  if (n < 4) return est;

  std::vector<Vec3> bearings(corr.size());
  for (size_t i = 0; i < corr.size(); ++i) {
    bearings[i] = Vec3((corr[i].observed.x() - intr.cx) / intr.fx, (corr[i].observed.y() - intr.cy) / intr.fy, 1.0)
                      .normalized();
  }
  auto score = [&](const PoseSE3& pose, std::vector<std::uint8_t>& mask, double& sq) {
    int count = 0;
    sq = 0.0;
    for (size_t i = 0; i < corr.size(); ++i) {
      const Residual r = reprojection_residual(intr, pose, corr[i].point, corr[i].observed);
      const double e = r.value.norm();
      mask[i] = !r.behind_camera && e < cfg.inlier_px;
      if (mask[i]) {
        ++count;
        sq += e * e;
      }
    }
    return count;
  };

  std::mt19937_64 rng(cfg.seed);
  std::uniform_int_distribution<int> pick(0, n - 1);
  std::vector<std::uint8_t> mask(corr.size()), best_mask(corr.size(), 0);
  int best_count = -1;
  double best_sq = std::numeric_limits<double>::infinity();
  PoseSE3 best_pose;
  int budget = cfg.iterations;
  for (int it = 0; it < budget; ++it) {
    int i0 = pick(rng), i1 = pick(rng), i2 = pick(rng);
    while (i1 == i0) i1 = pick(rng);
    while (i2 == i0 || i2 == i1) i2 = pick(rng);
    const std::array<Vec3, 3> pts = {corr[static_cast<size_t>(i0)].point, corr[static_cast<size_t>(i1)].point,
                                     corr[static_cast<size_t>(i2)].point};
    const std::array<Vec3, 3> brg = {bearings[static_cast<size_t>(i0)], bearings[static_cast<size_t>(i1)],
                                     bearings[static_cast<size_t>(i2)]};
    for (const PoseSE3& cand : solve_p3p(pts, brg)) {
      double sq = 0.0;
      const int count = score(cand, mask, sq);
      if (count > best_count || (count == best_count && sq < best_sq)) {
        best_count = count;
        best_sq = sq;
        best_pose = cand;
        best_mask = mask;
        // Adaptive termination for 99.9% confidence of an all-inlier sample.
        const double w = static_cast<double>(count) / n;
        const double p_good = w * w * w;
        if (p_good > 1e-9) {
          const double needed = std::log(1e-3) / std::log(std::max(1e-12, 1.0 - p_good));
          budget = std::min(budget, std::max(it + 1, static_cast<int>(std::ceil(needed))));
        }
      }
    }
  }
  if (best_count < 3) {
    est.status = PoseStatus::degenerate;
    return est;
  }

  est.minimal_rms = reprojection_rms(corr, best_mask, intr, best_pose);
  est.pose = refine_pose(corr, best_mask, intr, best_pose, cfg.max_refine_iterations);
  est.refined_rms = reprojection_rms(corr, best_mask, intr, est.pose);
  double sq = 0.0;
  est.inlier_count = score(est.pose, est.inliers, sq);
  est.status = est.inlier_count >= cfg.min_inliers ? PoseStatus::ok : PoseStatus::degenerate;
  return est;
}

}  // namespace gdf
