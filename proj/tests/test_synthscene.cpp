#include "doctest.h"
#include "gdf/synthscene.hpp"
#include "support.hpp"

using namespace gdf;

namespace {

StereoRig default_rig() { return StereoRig::rectified(CameraIntrinsics{}, 0.12); }

SyntheticDataset short_run(std::uint64_t seed, int frames) {
  TrajectorySpec t;
  t.frames = frames;
  return render_sequence(SceneSpec::canal(seed), make_trajectory(t), default_rig());
}

}  // namespace

TEST_SUITE("synthscene") {

TEST_CASE("same spec and seed render identical datasets") {
  const SyntheticDataset a = short_run(3, 3), b = short_run(3, 3);
  CHECK(a.left == b.left);
  CHECK(a.right == b.right);
  CHECK(a.gt_depth == b.gt_depth);
  CHECK(a.gt_region_mask == b.gt_region_mask);
  CHECK(short_run(4, 1).left != a.left);
}

TEST_CASE("static camera changes only the dynamic region") {
  const std::vector<PoseSE3> still(2, PoseSE3::identity());
  const SyntheticDataset ds = render_sequence(SceneSpec::canal(5), still, default_rig());
  int changed_static = 0, changed_dynamic = 0;
  for (int y = 0; y < 192; ++y) {
    for (int x = 0; x < 256; ++x) {
      const bool differs = ds.left[0].at(x, y) != ds.left[1].at(x, y);
      if (ds.gt_region_mask[0].at(x, y)) changed_dynamic += differs;
      else changed_static += differs;
    }
  }
  CHECK(changed_static == 0);
  CHECK(changed_dynamic > 100);
}

TEST_CASE("forward trajectory and water coverage") {
  const SyntheticDataset ds = short_run(7, 20);
  REQUIRE(ds.size() == 20);
  CHECK(max_abs_difference(ds.gt_poses.front(), PoseSE3::identity()) == 0.0);
  CHECK(ds.gt_poses.back().translation().z() == doctest::Approx(1.9));
  for (const auto& m : ds.gt_region_mask) {
    const double share = static_cast<double>(m.count()) / (256.0 * 192.0);
    CHECK(share > 0.05);
    CHECK(share < 0.6);
  }
  // The water texture decorrelates between frames.
  CHECK(dynamic_region_ncc(ds) < 0.5);
}

TEST_CASE("right image agrees with the left shifted by ground-truth disparity") {
  // fx * b / z = 200 * 0.12 / 5 = 4.8 px at 5 m
  const StereoRig rig = default_rig();
  CHECK(rig.left.fx * rig.baseline / 5.0 == doctest::Approx(4.8));
  const SyntheticDataset ds = short_run(7, 1);
  double err_true = 0.0, err_off = 0.0;
  int n = 0;
  for (int y = 20; y < 172; y += 3) {
    for (int x = 40; x < 216; x += 3) {
      const double z = ds.gt_depth[0].at(x, y);
      if (z <= 0.0 || ds.gt_region_mask[0].at(x, y)) continue;
      const double d = rig.left.fx * rig.baseline / z;
      if (x - d - 3 < 0) continue;
      err_true += std::abs(ds.left[0].at(x, y) - sample_bilinear(ds.right[0], x - d, y));
      err_off += std::abs(ds.left[0].at(x, y) - sample_bilinear(ds.right[0], x - d - 3.0, y));
      ++n;
    }
  }
  REQUIRE(n > 500);
  // occlusion edges and bilinear resampling leave a small floor
  CHECK(err_true / n < 0.03);
  CHECK(err_true < 0.3 * err_off);
}

TEST_CASE("ground-truth correspondence") {
  const StereoRig rig = default_rig();
  const SyntheticDataset ds = short_run(7, 3);
  const Vec2 pix(100.25, 60.5);
  const auto self = gt_correspondence(ds, 1, pix, 1, rig);
  REQUIRE(self.has_value());
  CHECK((*self - pix).norm() < 1e-12);
  bool found_dynamic = false;
  for (int y = 0; y < 192 && !found_dynamic; ++y) {
    for (int x = 0; x < 256; ++x) {
      if (!ds.gt_region_mask[0].at(x, y)) continue;
      CHECK_FALSE(gt_correspondence(ds, 0, Vec2(x, y), 1, rig).has_value());
      found_dynamic = true;
      break;
    }
  }
  CHECK(found_dynamic);
  // A static pixel reprojects consistently with depth and pose.
  const Vec2 p(128, 40);
  const double z = sample_depth(ds, 0, p);
  REQUIRE(z > 0.0);
  const auto c = gt_correspondence(ds, 0, p, 2, rig);
  REQUIRE(c.has_value());
  const Vec3 world = transform(ds.gt_poses[0], unproject(rig.left, p, z));
  const Vec2 expect = project(rig.left, transform(inverse(ds.gt_poses[2]), world));
  CHECK((*c - expect).norm() < 1e-9);
}

TEST_CASE("dataset round trip through disk") {
  const SceneSpec spec = SceneSpec::canal(2);
  TrajectorySpec t;
  t.frames = 2;
  const SyntheticDataset ds = render_sequence(spec, make_trajectory(t), default_rig());
  const auto dir = test::scratch_dir("dataset");
  write_dataset(dir, ds, spec, default_rig());
  const StoredDataset back = read_dataset(dir);
  CHECK(back.data.left == ds.left);
  CHECK(back.data.right == ds.right);
  CHECK(back.data.gt_region_mask == ds.gt_region_mask);
  for (size_t f = 0; f < ds.size(); ++f) {
    CHECK(max_abs_difference(back.data.gt_poses[f], ds.gt_poses[f]) < 1e-9);
    double worst = 0.0;
    for (size_t i = 0; i < ds.gt_depth[f].meters.size(); ++i) {
      worst = std::max(worst, std::abs(back.data.gt_depth[f].meters[i] - ds.gt_depth[f].meters[i]));
    }
    CHECK(worst <= 0.0005 + 1e-12);  // millimeter storage
  }
  CHECK(back.spec.seed == spec.seed);
  CHECK_THROWS_AS(read_dataset(dir / "nowhere"), IoError);
}

TEST_CASE("invalid scenes are rejected") {
  SceneSpec s = SceneSpec::canal(1);
  s.landmark_count = 0;
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  s = SceneSpec::canal(1);
  s.static_planes.front().edge_v = s.static_planes.front().edge_u;
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  s = SceneSpec::canal(1);
  s.width = 250;
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);

  s = SceneSpec::canal(1);
  TexturedPlane through_camera;
  through_camera.origin = Vec3(-0.2, -0.2, 0.0);
  through_camera.edge_u = Vec3(0.4, 0, 0);
  through_camera.edge_v = Vec3(0, 0.4, 0);
  s.static_planes.push_back(through_camera);
  CHECK_THROWS_AS(render_sequence(s, {PoseSE3::identity()}, default_rig()), SceneConstructionError);
}

}  // TEST_SUITE
