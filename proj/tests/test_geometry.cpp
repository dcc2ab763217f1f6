#include "doctest.h"
#include "gdf/geometry.hpp"
#include "support.hpp"

using namespace gdf;

namespace {

CameraIntrinsics small_camera() {
  CameraIntrinsics c;
  c.fx = c.fy = 100.0;
  c.cx = c.cy = 50.0;
  c.width = c.height = 101;
  return c;
}

}  // namespace

TEST_SUITE("geometry") {

TEST_CASE("projection of axis and off-axis points") {
  const CameraIntrinsics c = small_camera();
  const Vec2 a = project(c, Vec3(0, 0, 2));
  CHECK(a.x() == doctest::Approx(50.0));
  CHECK(a.y() == doctest::Approx(50.0));
  // u = 100 * 1/2 + 50
  const Vec2 b = project(c, Vec3(1, 0, 2));
  CHECK(b.x() == doctest::Approx(100.0));
  CHECK(b.y() == doctest::Approx(50.0));
  CHECK_THROWS_AS(project(c, Vec3(1, 1, 0)), GeometryDomainError);
  CHECK_THROWS_AS(project(c, Vec3(1, 1, -1)), GeometryDomainError);
}

TEST_CASE("unprojection of the principal point and bad depth") {
  const CameraIntrinsics c = small_camera();
  const Vec3 p = unproject(c, Vec2(50, 50), 3.0);
  CHECK((p - Vec3(0, 0, 3)).norm() < 1e-12);
  CHECK_THROWS_AS(unproject(c, Vec2(10, 10), 0.0), GeometryDomainError);
  CHECK_THROWS_AS(unproject(c, Vec2(10, 10), -2.0), GeometryDomainError);
}

TEST_CASE("project/unproject round trip on random pixels") {
  CameraIntrinsics c;
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> ux(0, c.width - 1.0), uy(0, c.height - 1.0), uz(0.1, 80.0);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const Vec2 pix(ux(rng), uy(rng));
    worst = std::max(worst, (project(c, unproject(c, pix, uz(rng))) - pix).norm());
  }
  CHECK(worst < 1e-9);
}

TEST_CASE("pose group laws") {
  std::mt19937_64 rng(3);
  CHECK(max_abs_difference(inverse(PoseSE3::identity()), PoseSE3::identity()) == 0.0);
  const PoseSE3 t(Mat3::Identity(), Vec3(0.3, -1, 2));
  const PoseSE3 back(Mat3::Identity(), Vec3(-0.3, 1, -2));
  CHECK(max_abs_difference(compose(back, t), PoseSE3::identity()) < 1e-15);
  for (int i = 0; i < 200; ++i) {
    const PoseSE3 a = test::random_pose(rng), b = test::random_pose(rng), c = test::random_pose(rng);
    CHECK(max_abs_difference(compose(compose(a, b), c), compose(a, compose(b, c))) < 1e-9);
    CHECK(max_abs_difference(compose(a, inverse(a)), PoseSE3::identity()) < 1e-9);
    CHECK(max_abs_difference(compose(PoseSE3::identity(), a), a) < 1e-15);
    const Vec3 x(0.1 * i, -1, 2);
    CHECK((transform(compose(a, b), x) - transform(a, transform(b, x))).norm() < 1e-9);
  }
}

TEST_CASE("pose construction rejects a non-rotation") {
  Mat3 r = Mat3::Identity();
  r(0, 0) = -1.0;  // reflection
  CHECK_THROWS(PoseSE3(r, Vec3::Zero()));
  CHECK_THROWS(PoseSE3(2.0 * Mat3::Identity(), Vec3::Zero()));
}

TEST_CASE("quaternion round trip") {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 50; ++i) {
    const PoseSE3 a = test::random_pose(rng);
    CHECK(max_abs_difference(PoseSE3::from_quaternion(a.quaternion(), a.translation()), a) < 1e-12);
  }
}

TEST_CASE("rectified triangulation") {
  CameraIntrinsics c = small_camera();
  const StereoRig rig = StereoRig::rectified(c, 0.1);
  // depth = fx * b / d = 100 * 0.1 / 10
  const Triangulation t = triangulate_rectified(rig, Vec2(50, 50), Vec2(40, 50));
  REQUIRE(t.ok());
  CHECK(t.depth == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(triangulate_rectified(rig, Vec2(50, 50), Vec2(50, 50)).status == StereoStatus::far_point);
  CHECK(triangulate_rectified(rig, Vec2(50, 50), Vec2(49.9, 50)).status == StereoStatus::far_point);
  CHECK(triangulate_rectified(rig, Vec2(50, 50), Vec2(40, 53)).status == StereoStatus::epipolar_violation);
}

TEST_CASE("noiseless triangulation recovers points") {
  const StereoRig rig = StereoRig::rectified(CameraIntrinsics{}, 0.12);
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-1, 1), z(0.5, 20);
  double worst = 0.0;
  for (int i = 0; i < 500; ++i) {
    const double depth = z(rng);
    const Vec3 p(u(rng) * depth * 0.5, u(rng) * depth * 0.4, depth);
    const Vec2 l = project(rig.left, p);
    const Vec2 r = project(rig.right, transform(rig.extrinsic, p));
    const Triangulation t = triangulate_rectified(rig, l, r, {0.1, 1.0});
    REQUIRE(t.ok());
    worst = std::max(worst, (t.point - p).norm());
  }
  CHECK(worst < 1e-6);
}

TEST_CASE("reprojection residual") {
  const CameraIntrinsics c = small_camera();
  const Residual zero = reprojection_residual(c, PoseSE3::identity(), Vec3(0, 0, 2), Vec2(50, 50));
  CHECK(zero.value.norm() < 1e-12);
  CHECK_FALSE(zero.behind_camera);
  std::mt19937_64 rng(2);
  const PoseSE3 pose = test::random_pose(rng, 0.1, 0.2);
  const Vec3 p(0.2, -0.1, 3);
  const Vec2 seen = project(c, transform(pose, p));
  CHECK(reprojection_residual(c, pose, p, seen).value.norm() < 1e-9);
  const PoseSE3 flip = PoseSE3::from_rotation_vector(Vec3(0, M_PI, 0), Vec3::Zero());
  CHECK(reprojection_residual(c, flip, p, seen).behind_camera);
}

TEST_CASE("residual grows with distance from the image center under a rotation error") {
  // A one degree error about the optical axis moves a pixel by r * angle.
  const CameraIntrinsics c;
  const PoseSE3 err = PoseSE3::from_rotation_vector(Vec3(0, 0, M_PI / 180.0), Vec3::Zero());
  double previous = -1.0;
  for (int k = 0; k < 10; ++k) {
    const Vec2 pix(c.cx + 8.0 * k, c.cy + 6.0 * k);
    const double r = reprojection_residual(c, err, unproject(c, pix, 4.0), pix).value.norm();
    CHECK(r > previous);
    previous = r;
  }
}

TEST_CASE("homography sampling") {
  HomographyConfig flat;
  flat.scale_amplitude = flat.rotation_deg = flat.translation_fraction = flat.perspective_fraction = 0.0;
  CHECK((sample_homography(flat, 4).matrix() - Mat3::Identity()).norm() < 1e-12);
  const HomographyConfig cfg;
  CHECK(sample_homography(cfg, 9).matrix() == sample_homography(cfg, 9).matrix());
  CHECK(sample_homography(cfg, 9).matrix() != sample_homography(cfg, 10).matrix());
  HomographyConfig bad;
  bad.scale_amplitude = 1.5;
  CHECK_THROWS(bad.validate());
}

TEST_CASE("homography from four points reproduces them") {
  const std::array<Vec2, 4> src{Vec2(0, 0), Vec2(10, 0), Vec2(10, 10), Vec2(0, 10)};
  const std::array<Vec2, 4> dst{Vec2(1, 2), Vec2(12, 1), Vec2(11, 13), Vec2(-1, 9)};
  const Homography h = homography_from_points(src, dst);
  for (int i = 0; i < 4; ++i) CHECK((h.apply(src[i]) - dst[i]).norm() < 1e-9);
  CHECK((h.inverse().apply(dst[2]) - src[2]).norm() < 1e-9);
}

TEST_CASE("warping") {
  GrayImage img(20, 12);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) img.at(x, y) = static_cast<float>((x * 7 + y * 13) % 17) / 16.0f;
  const WarpResult same = warp_image(img, Homography());
  CHECK(same.image == img);
  CHECK(same.valid.count() == 240);

  const WarpResult shifted = warp_image(img, Homography::translation(5, 0));
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      CHECK(static_cast<bool>(shifted.valid.at(x, y)) == (x >= 5));
      if (x >= 5) CHECK(shifted.image.at(x, y) == doctest::Approx(img.at(x - 5, y)));
    }
  }
}

TEST_CASE("trajectory csv round trip") {
  std::mt19937_64 rng(4);
  std::vector<TimedPose> traj;
  for (int i = 0; i < 5; ++i) traj.push_back({0.1 * i, test::random_pose(rng)});
  const auto dir = test::scratch_dir("traj");
  write_trajectory_csv(dir / "t.csv", traj);
  const auto back = read_trajectory_csv(dir / "t.csv");
  REQUIRE(back.size() == traj.size());
  for (size_t i = 0; i < traj.size(); ++i) {
    CHECK(back[i].timestamp == doctest::Approx(traj[i].timestamp));
    CHECK(max_abs_difference(back[i].pose, traj[i].pose) < 1e-9);
  }
  CHECK_THROWS_AS(read_trajectory_csv(dir / "missing.csv"), IoError);
}

}  // TEST_SUITE
