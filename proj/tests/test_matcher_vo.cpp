#include "doctest.h"
#include "gdf/matcher_vo.hpp"
#include "gdf/synthscene.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace gdf;

namespace {

std::vector<Keypoint> random_keypoints(std::mt19937_64& rng, int n, int dim) {
  std::uniform_int_distribution<int> ux(0, 255), uy(0, 191);
  std::vector<Keypoint> out;
  for (int i = 0; i < n; ++i) out.push_back({ux(rng), uy(rng), 1.0, test::random_unit(rng, dim)});
  return out;
}

// A textured wall facing the camera 3 m away: every pixel has disparity
// exactly 8 px with fx = 200 and a 0.12 m baseline.
SceneSpec wall_scene() {
  SceneSpec s;
  s.seed = 3;
  TexturedPlane wall;
  wall.origin = Vec3(-10, -8, 3);
  wall.edge_u = Vec3(20, 0, 0);
  wall.edge_v = Vec3(0, 16, 0);
  wall.richness = 1.0;
  s.static_planes = {wall};
  s.dynamic_region.origin = Vec3(-1, 20, 10);
  s.dynamic_region.edge_u = Vec3(2, 0, 0);
  s.dynamic_region.edge_v = Vec3(0, 0, 2);
  return s;
}

std::vector<Correspondence3d2d> synthetic_correspondences(std::mt19937_64& rng, const PoseSE3& pose,
                                                          const CameraIntrinsics& intr, int n) {
  std::uniform_real_distribution<double> ux(0, intr.width - 1.0), uy(0, intr.height - 1.0), uz(2, 15);
  std::vector<Correspondence3d2d> out;
  while (static_cast<int>(out.size()) < n) {
    const Vec3 p = unproject(intr, Vec2(ux(rng), uy(rng)), uz(rng));
    const Vec3 q = transform(pose, p);
    if (q.z() <= 0.1) continue;
    const Vec2 pix = project(intr, q);
    if (!intr.in_image(pix)) continue;
    out.push_back({p, pix});
  }
  return out;
}

}  // namespace

TEST_SUITE("matcher_vo") {

TEST_CASE("descriptor matching edge cases") {
  std::mt19937_64 rng(1);
  const auto a = random_keypoints(rng, 30, 32);
  const auto same = match_descriptors(a, a, 0.9, true);
  REQUIRE(same.size() == a.size());
  for (int i = 0; i < 30; ++i) CHECK((same[i].idx_a == i && same[i].idx_b == i));
  CHECK(match_descriptors(a, {}, 0.9, true).empty());
  CHECK(match_descriptors({}, a, 0.9, false).empty());
  // A single candidate skips the ratio test.
  const std::vector<Keypoint> one{a[3]};
  CHECK(match_descriptors(one, a, 0.9, true).size() == 1);
}

TEST_CASE("matching agrees with the exhaustive reference") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 40; ++trial) {
    auto a = random_keypoints(rng, 50, 8);
    auto b = random_keypoints(rng, 50, 8);
    // Plant noisy copies so that some pairs pass the ratio test.
    for (int k = 0; k < 20; ++k) {
      b[static_cast<size_t>(k)].descriptor =
          (a[static_cast<size_t>(k * 2)].descriptor + 0.3 * test::random_unit(rng, 8)).normalized();
    }
    const bool mutual = trial % 2 == 0;
    const double ratio = trial % 3 == 0 ? 0.8 : 0.95;
    CandidateGate gate;
    if (trial % 4 == 1) gate = [&](int i, int j) { return std::abs(a[i].y - b[j].y) < 60; };
    const auto got = match_descriptors(a, b, ratio, mutual, gate);
    const auto want = oracle::match(a, b, ratio, mutual, gate);
    REQUIRE(got.size() == want.size());
    for (size_t k = 0; k < got.size(); ++k) {
      CHECK(got[k].idx_a == want[k].idx_a);
      CHECK(got[k].idx_b == want[k].idx_b);
      CHECK(got[k].similarity == doctest::Approx(want[k].similarity).epsilon(1e-12));
    }
  }
}

TEST_CASE("mutual matching is symmetric") {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 20; ++trial) {
    const auto a = random_keypoints(rng, 40, 6), b = random_keypoints(rng, 35, 6);
    const auto ab = match_descriptors(a, b, 0.9, true), ba = match_descriptors(b, a, 0.9, true);
    REQUIRE(ab.size() == ba.size());
    for (const Match& m : ab) {
      CHECK(std::any_of(ba.begin(), ba.end(), [&](const Match& r) { return r.idx_a == m.idx_b && r.idx_b == m.idx_a; }));
    }
  }
}

TEST_CASE("stereo matching geometry") {
  CameraIntrinsics c;
  c.fx = c.fy = 100;
  c.cx = c.cy = 50;
  c.width = c.height = 101;
  const StereoRig rig = StereoRig::rectified(c, 0.1);
  std::mt19937_64 rng(4);
  const Eigen::VectorXd d = test::random_unit(rng, 16);
  const std::vector<Keypoint> left{{50, 50, 1, d}};
  auto got = stereo_match(left, {{40, 50, 1, d}}, rig);
  REQUIRE(got.size() == 1);
  REQUIRE(got[0].depth.has_value());
  CHECK(*got[0].depth == doctest::Approx(1.0));

  CHECK(stereo_match(left, {{40, 55, 1, d}}, rig).empty());   // off the epipolar band
  CHECK(stereo_match(left, {{60, 50, 1, d}}, rig).empty());   // negative disparity
  got = stereo_match({{50, 50, 1, d}}, {{50, 50, 1, d}}, rig);
  CHECK(got.empty());  // zero disparity is not a candidate
}

TEST_CASE("stereo depth on a noiseless frame") {
  const SceneSpec spec = wall_scene();
  const StereoRig rig = StereoRig::rectified(CameraIntrinsics{}, 0.12);
  const SyntheticDataset ds = render_sequence(spec, {PoseSE3::identity()}, rig);
  const ClassicalExtractor ex;
  const auto l = ex.extract(ds.left[0]), r = ex.extract(ds.right[0]);
  const auto matches = stereo_match(l, r, rig, {}, &ds.left[0], &ds.right[0]);
  int close = 0, with_depth = 0;
  for (const auto& m : matches) {
    if (!m.depth) continue;
    ++with_depth;
    const auto& k = l[static_cast<size_t>(m.match.idx_a)];
    close += std::abs(*m.depth - ds.gt_depth[0].at(k.x, k.y)) <= 1e-3;
  }
  REQUIRE(with_depth > 50);
  CHECK(static_cast<double>(close) / with_depth >= 0.95);
}

TEST_CASE("p3p returns the generating pose") {
  std::mt19937_64 rng(6);
  const CameraIntrinsics intr;
  for (int trial = 0; trial < 50; ++trial) {
    const PoseSE3 pose = test::random_pose(rng, 0.3, 0.5);
    const auto corr = synthetic_correspondences(rng, pose, intr, 3);
    std::array<Vec3, 3> pts, bearings;
    for (int i = 0; i < 3; ++i) {
      pts[i] = corr[i].point;
      bearings[i] = unproject(intr, corr[i].observed, 1.0).normalized();
    }
    double best = 1e9;
    for (const PoseSE3& cand : solve_p3p(pts, bearings)) best = std::min(best, max_abs_difference(cand, pose));
    CHECK(best < 1e-6);
  }
}

TEST_CASE("pose from noiseless correspondences") {
  std::mt19937_64 rng(7);
  const CameraIntrinsics intr;
  for (int trial = 0; trial < 10; ++trial) {
    const PoseSE3 pose = test::random_pose(rng, 0.1, 0.3);
    const auto corr = synthetic_correspondences(rng, pose, intr, 60);
    const PoseEstimate est = estimate_relative_pose(corr, intr);
    REQUIRE(est.status == PoseStatus::ok);
    CHECK(compose(est.pose, inverse(pose)).rotation_angle() < 1e-6);
    CHECK((est.pose.translation() - pose.translation()).norm() < 1e-6);
    CHECK(est.inlier_count == 60);
  }
  const auto still = synthetic_correspondences(rng, PoseSE3::identity(), intr, 40);
  CHECK(max_abs_difference(estimate_relative_pose(still, intr).pose, PoseSE3::identity()) < 1e-9);
  const std::vector<Correspondence3d2d> three(still.begin(), still.begin() + 3);
  CHECK(estimate_relative_pose(three, intr).status == PoseStatus::too_few_points);
  const std::vector<Correspondence3d2d> eight(still.begin(), still.begin() + 8);
  CHECK(estimate_relative_pose(eight, intr).status == PoseStatus::degenerate);
}

TEST_CASE("gross outliers are rejected") {
  std::mt19937_64 rng(8);
  const CameraIntrinsics intr;
  const PoseSE3 pose = test::random_pose(rng, 0.05, 0.2);
  auto corr = synthetic_correspondences(rng, pose, intr, 100);
  std::uniform_real_distribution<double> angle(0, 2 * M_PI);
  std::vector<int> corrupted;
  for (int i = 0; i < 30; ++i) {
    const double a = angle(rng);
    corr[static_cast<size_t>(i * 3)].observed += 50.0 * Vec2(std::cos(a), std::sin(a));
    corrupted.push_back(i * 3);
  }
  const PoseEstimate est = estimate_relative_pose(corr, intr);
  REQUIRE(est.status == PoseStatus::ok);
  int excluded = 0;
  for (int i : corrupted) excluded += est.inliers[static_cast<size_t>(i)] == 0;
  CHECK(excluded >= 29);  // at least 95% of 30
  CHECK(max_abs_difference(est.pose, pose) < 1e-6);
}

TEST_CASE("pose refinement never increases the cost") {
  std::mt19937_64 rng(10);
  std::normal_distribution<double> noise(0, 0.7);
  const CameraIntrinsics intr;
  for (int trial = 0; trial < 30; ++trial) {
    const PoseSE3 pose = test::random_pose(rng, 0.1, 0.3);
    auto corr = synthetic_correspondences(rng, pose, intr, 30);
    for (auto& c : corr) c.observed += Vec2(noise(rng), noise(rng));
    const std::vector<std::uint8_t> use(corr.size(), 1);
    const PoseSE3 start = compose(test::random_pose(rng, 0.05, 0.05), pose);
    const double before = reprojection_rms(corr, use, intr, start);
    const double after = reprojection_rms(corr, use, intr, refine_pose(corr, use, intr, start));
    CHECK(after <= before);
  }
}

TEST_CASE("static camera yields identity motion") {
  const StereoRig rig = StereoRig::rectified(CameraIntrinsics{}, 0.12);
  const SyntheticDataset ds = render_sequence(SceneSpec::canal(7), std::vector<PoseSE3>(4), rig);
  const VOResult vo = run_vo(ds.left, ds.right, ClassicalExtractor(), rig);
  REQUIRE(vo.relative_poses.size() == 3);
  CHECK(vo.failure_count() == 0);
  for (const PoseSE3& p : vo.relative_poses) {
    CHECK(p.rotation_angle() * 180.0 / M_PI < 0.01);
    CHECK(p.translation().norm() < 1e-3);
  }
}

TEST_CASE("vo is deterministic and chains relative poses") {
  const StereoRig rig = StereoRig::rectified(CameraIntrinsics{}, 0.12);
  TrajectorySpec t;
  t.frames = 5;
  const SyntheticDataset ds = render_sequence(SceneSpec::canal(8), make_trajectory(t), rig);
  const VOResult a = run_vo(ds.left, ds.right, ClassicalExtractor(), rig);
  const VOResult b = run_vo(ds.left, ds.right, ClassicalExtractor(), rig);
  REQUIRE(a.relative_poses.size() == 4);
  for (size_t i = 0; i < 4; ++i) CHECK(max_abs_difference(a.relative_poses[i], b.relative_poses[i]) == 0.0);
  const auto traj = a.trajectory();
  for (size_t i = 0; i < 4; ++i) {
    CHECK(max_abs_difference(compose(inverse(traj[i + 1]), traj[i]), a.relative_poses[i]) < 1e-9);
  }
  for (const Track& tr : a.tracks) {
    for (size_t k = 1; k < tr.observations.size(); ++k) {
      CHECK(tr.observations[k].frame == tr.observations[k - 1].frame + 1);
    }
  }
}

TEST_CASE("tracks csv round trip") {
  std::vector<Track> tracks(2);
  tracks[0].id = 0;
  tracks[0].observations = {{0, 3, Vec2(10, 20), Vec2(4.5, 20), 4.0}, {1, 7, Vec2(11, 21), std::nullopt, std::nullopt}};
  tracks[1].id = 1;
  tracks[1].observations = {{2, 0, Vec2(100.5, 3), Vec2(90.25, 3), 2.4}};
  const auto dir = test::scratch_dir("tracks");
  write_tracks_csv(dir / "t.csv", tracks);
  const auto back = read_tracks_csv(dir / "t.csv");
  REQUIRE(back.size() == 2);
  REQUIRE(back[0].observations.size() == 2);
  CHECK(back[0].observations[0].right->x() == doctest::Approx(4.5));
  CHECK(*back[0].observations[0].depth == doctest::Approx(4.0));
  CHECK_FALSE(back[0].observations[1].right.has_value());
  CHECK_FALSE(back[0].observations[1].depth.has_value());
  CHECK(back[1].observations[0].left.x() == doctest::Approx(100.5));
  CHECK(back[1].observations[0].frame == 2);
}

}  // TEST_SUITE
