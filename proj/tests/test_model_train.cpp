#include <fstream>

#include "doctest.h"
#include "gdf/model_train.hpp"
#include "gdf/synthscene.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace gdf;

namespace {

GrayImage noise_image(std::mt19937_64& rng, int w, int h) {
  GrayImage img(w, h);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  for (float& p : img.pixels) p = u(rng);
  return img;
}

ScoreGrid random_logits(std::mt19937_64& rng, int hc, int wc) {
  ScoreGrid g(hc, wc);
  std::normal_distribution<double> n(0.0, 2.0);
  for (Eigen::Index i = 0; i < g.logits.size(); ++i) g.logits.data()[i] = n(rng);
  return g;
}

LabelGrid random_labels(std::mt19937_64& rng, int hc, int wc) {
  LabelGrid y(hc, wc);
  std::uniform_int_distribution<int> label(0, 64), coin(0, 3);
  for (int c = 0; c < y.cells(); ++c) {
    y.labels[static_cast<size_t>(c)] = coin(rng) == 0 ? kDustbin : label(rng);
    y.supervised[static_cast<size_t>(c)] = coin(rng) != 1;
  }
  return y;
}

}  // namespace

TEST_SUITE("model_train") {

TEST_CASE("network output shapes and zero heads") {
  ModelParams p = ModelParams::init(192, 256, 64, 1);
  const NetworkOutput out = forward(p, GrayImage(256, 192));
  CHECK(out.scores.hc == 24);
  CHECK(out.scores.wc == 32);
  CHECK(out.descriptors.desc.rows() == 64);
  CHECK(out.descriptors.desc.cols() == 24 * 32);

  const auto blocks = p.layout();
  p.values.segment(blocks[3].weight, blocks[3].bias + blocks[3].rows - blocks[3].weight).setZero();
  const NetworkOutput flat = forward(p, GrayImage(256, 192));
  CHECK(flat.scores.logits.cwiseAbs().maxCoeff() == 0.0);
  for (double prob : decode_scores(flat.scores).probs) CHECK(prob == doctest::Approx(1.0 / 65.0));

  CHECK_THROWS_AS(forward(p, GrayImage(128, 96)), ModelShapeError);
  CHECK_THROWS_AS(ModelParams::init(100, 256, 64, 1), ModelShapeError);
}

TEST_CASE("detector loss examples") {
  ScoreGrid x(2, 2);
  LabelGrid y(2, 2);
  y.labels = {3, kDustbin, 17, 63};
  const std::vector<std::uint8_t> all(4, 1);
  CHECK(detector_loss(x, y, all).value == doctest::Approx(std::log(65.0)).epsilon(1e-12));
  for (int c = 0; c < 4; ++c) x.logits(y.labels[static_cast<size_t>(c)], c) = 20.0;
  CHECK(detector_loss(x, y, all).value < 1e-6);
  const LossValue none = detector_loss(x, y, std::vector<std::uint8_t>(4, 0));
  CHECK(none.empty);
  CHECK(none.value == 0.0);
}

TEST_CASE("peaky loss examples") {
  ScoreGrid x(2, 2);
  LabelGrid y(2, 2);
  y.labels = {3, kDustbin, 17, kDustbin};
  CHECK(peaky_loss(x, y).value == doctest::Approx(1.0 - 1.0 / 65.0).epsilon(1e-12));
  x.logits(40, 0) = 20.0;
  x.logits(5, 2) = 20.0;
  CHECK(peaky_loss(x, y).value < 1e-6);
  CHECK(peaky_loss(x, LabelGrid(2, 2)).empty);
}

TEST_CASE("detector and peaky gradients on 4x4-cell inputs") {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    const ScoreGrid x = random_logits(rng, 4, 4);
    const LabelGrid y = random_labels(rng, 4, 4);
    std::vector<std::uint8_t> valid(16, 1);
    valid[static_cast<size_t>(trial % 16)] = 0;
    const LossValue d = detector_loss(x, y, valid);
    const LossValue pk = peaky_loss(x, y);
    for (Eigen::Index i = 0; i < x.logits.size(); i += 7) {
      ScoreGrid a = x, b = x;
      a.logits.data()[i] += 1e-3;
      b.logits.data()[i] -= 1e-3;
      const double fd = (detector_loss(a, y, valid).value - detector_loss(b, y, valid).value) / 2e-3;
      CHECK(d.grad.data()[i] == doctest::Approx(fd).epsilon(1e-4).scale(1e-3));
      const double fdp = (peaky_loss(a, y).value - peaky_loss(b, y).value) / 2e-3;
      CHECK(pk.grad.data()[i] == doctest::Approx(fdp).epsilon(1e-4).scale(1e-3));
    }
  }
}

TEST_CASE("hinge loss examples") {
  std::mt19937_64 rng(2);
  const CorrespondenceMatrix s = build_correspondence_matrix(Homography(), 32, 16, 8);
  DescriptorField d(2, 4, 8);
  for (int c = 0; c < 8; ++c) d.desc.col(c) = Eigen::VectorXd::Unit(8, c) * (1.0 + c);
  // Orthogonal negatives, identical positives.
  const HingeValue h = descriptor_hinge_loss(d, d, s);
  CHECK(h.value == doctest::Approx(0.0));
  CHECK(h.grad.norm() == doctest::Approx(0.0));
  CHECK(h.fallbacks == 0);

  DescriptorField zero(2, 4, 8);
  const HingeValue z = descriptor_hinge_loss(zero, d, s);
  CHECK(z.fallbacks == 8);
  CHECK(std::isfinite(z.value));
}

TEST_CASE("hinge loss agrees with the pairwise reference") {
  std::mt19937_64 rng(12);
  HomographyConfig hc;
  hc.width = 32;
  hc.height = 24;
  for (int trial = 0; trial < 30; ++trial) {
    DescriptorField a(3, 4, 5), b(3, 4, 5);
    std::normal_distribution<double> n;
    for (Eigen::Index i = 0; i < a.desc.size(); ++i) {
      a.desc.data()[i] = n(rng);
      b.desc.data()[i] = n(rng);
    }
    const CorrespondenceMatrix s = build_correspondence_matrix(sample_homography(hc, trial), 32, 24, 8);
    const HingeParams hp{1.0, 0.2, trial % 2 ? 250.0 : 3.0};
    const double want = oracle::hinge(a.desc, b.desc, s, hp.m_p, hp.m_n, hp.lambda_d);
    CHECK(descriptor_hinge_loss(a, b, s, hp).value == doctest::Approx(want).epsilon(1e-9));
  }
}

TEST_CASE("total loss is the weighted sum") {
  LossWeights only_i{1, 0, 0, 0};
  CHECK(total_loss(1.5, 7, 9, 11, only_i).total == 1.5);
  const LossReport r = total_loss(1, 2, 3, 4, LossWeights{});
  CHECK(r.total == doctest::Approx(1 + 2 + 0.75 + 2));
  CHECK_THROWS(total_loss(1, 1, 1, 1, LossWeights{0, 0, 0, 0}));
  CHECK_THROWS(total_loss(1, 1, 1, 1, LossWeights{-1, 0, 0, 1}));
}

TEST_CASE("checkpoint round trip") {
  const ModelParams p = ModelParams::init(24, 32, 8, 5);
  const auto dir = test::scratch_dir("ckpt");
  save_checkpoint(dir / "w.bin", p);
  const ModelParams q = load_checkpoint(dir / "w.bin");
  CHECK(q.height == 24);
  CHECK(q.width == 32);
  CHECK(q.dim == 8);
  CHECK((q.values - p.values).cwiseAbs().maxCoeff() < 1e-6);
  // float32 storage is a fixed point after one round trip
  save_checkpoint(dir / "w2.bin", q);
  CHECK(load_checkpoint(dir / "w2.bin").values == q.values);

  std::filesystem::resize_file(dir / "w.bin", 100);
  CHECK_THROWS_AS(load_checkpoint(dir / "w.bin"), IoError);
  CHECK_THROWS_AS(load_checkpoint(dir / "nothing.bin"), IoError);
}

TEST_CASE("training steps") {
  std::mt19937_64 rng(3);
  ModelParams p = ModelParams::init(24, 32, 8, 2);
  TrainConfig cfg;
  cfg.homography.width = 32;
  cfg.homography.height = 24;
  std::vector<TrainSample> batch;
  for (int i = 0; i < 2; ++i) {
    batch.push_back({noise_image(rng, 32, 24), build_label_grid({{5 + 8 * i, 9, 0.1}}, 32, 24),
                     sample_homography(cfg.homography, i)});
  }

  TrainConfig frozen = cfg;
  frozen.step_size = 0.0;
  Optimizer opt;
  const Eigen::VectorXd before = p.values;
  train_step(p, opt, batch, frozen);
  CHECK(p.values == before);

  ModelParams a = ModelParams::init(24, 32, 8, 2), b = a;
  Optimizer oa, ob;
  for (int s = 0; s < 5; ++s) {
    train_step(a, oa, batch, cfg);
    train_step(b, ob, batch, cfg);
  }
  CHECK(a.values == b.values);
  CHECK(a.values != before);

  std::vector<TrainSample> poisoned = batch;
  poisoned[0].image.pixels[10] = std::numeric_limits<float>::quiet_NaN();
  const Eigen::VectorXd held = a.values;
  const Eigen::VectorXd held_v = oa.velocity;
  const StepResult r = train_step(a, oa, poisoned, cfg);
  CHECK(r.rejected);
  CHECK(a.values == held);
  CHECK(oa.velocity == held_v);
}

TEST_CASE("training log file") {
  const auto dir = test::scratch_dir("log");
  write_training_log(dir / "log.csv", {{0, {1, 2, 3, 4, 10}}, {1, {0.5, 1, 1.5, 2, 5}}});
  std::ifstream in(dir / "log.csv");
  std::string header;
  std::getline(in, header);
  CHECK(header == "step,l_i,l_i_warped,l_pk,l_d,total");
}

TEST_CASE("self-supervised round") {
  // 128 x 96 keeps this quick.
  CameraIntrinsics intr;
  intr.width = 128;
  intr.height = 96;
  intr.fx = intr.fy = 100;
  intr.cx = 64;
  intr.cy = 48;
  const StereoRig rig = StereoRig::rectified(intr, 0.12);
  TrajectorySpec t;
  t.frames = 6;
  const SyntheticDataset ds = render_sequence(SceneSpec::canal(7, 128, 96), make_trajectory(t), rig);
  ModelParams p = ModelParams::init(96, 128, 32, 1);
  Optimizer opt;
  RoundConfig rc;
  rc.train.steps = 3;
  rc.train.batch_size = 2;
  rc.train.homography.width = 128;
  rc.train.homography.height = 96;
  const RoundReport rep = self_supervised_round(ds.left, ds.right, p, opt, rig, rc);
  CHECK(rep.good_tracks > 0);
  CHECK(rep.labeled_frames > 0);
  REQUIRE(rep.log.size() == 3);
  for (const LogRow& row : rep.log) CHECK(std::isfinite(row.report.total));

  CHECK_THROWS_AS(self_supervised_round({ds.left[0]}, {ds.right[0]}, p, opt, rig, rc), std::invalid_argument);

  const std::vector<GrayImage> blank(3, GrayImage(128, 96, 0.5f));
  CHECK_THROWS_AS(self_supervised_round(blank, blank, p, opt, rig, rc), RoundAborted);
}

}  // TEST_SUITE
