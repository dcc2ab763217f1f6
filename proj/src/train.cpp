#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <random>

#include "gdf/model_train.hpp"

namespace gdf {

void TrainConfig::validate() const {
  if (!(step_size >= 0.0) || !(momentum >= 0.0 && momentum < 1.0)) {
    throw std::invalid_argument("TrainConfig: step_size must be >= 0 and momentum in [0, 1)");
  }
  if (steps < 0 || batch_size < 1) throw std::invalid_argument("TrainConfig: steps >= 0 and batch_size >= 1 required");
  if (!(hinge.lambda_d >= 0.0) || !(eps_cell > 0.0)) throw std::invalid_argument("TrainConfig: bad hinge settings");
  weights.validate();
}

SampleGradient sample_gradient(const ModelParams& params, const TrainSample& sample, const TrainConfig& cfg) {
  ForwardCache cache, cache_warped;
  const NetworkOutput net = forward(params, sample.image, &cache);
  const WarpedPair warped = make_warped_pair(sample.image, sample.labels, sample.h);
  const NetworkOutput net_warped = forward(params, warped.image, &cache_warped);
  const CorrespondenceMatrix s =
      build_correspondence_matrix(sample.h, sample.image.width, sample.image.height, cfg.eps_cell);

  const std::vector<std::uint8_t> all(static_cast<size_t>(net.scores.cells()), 1);
  const LossValue li = detector_loss(net.scores, sample.labels, all);
  const LossValue li_w = detector_loss(net_warped.scores, warped.grid, warped.valid);
  const LossValue pk = peaky_loss(net.scores, sample.labels);
  const HingeValue ld = descriptor_hinge_loss(net.descriptors, net_warped.descriptors, s, cfg.hinge);
  const LossWeights& w = cfg.weights;

  SampleGradient out;
  out.report = total_loss(li.value, li_w.value, pk.value, ld.value, w);
  out.grad = Eigen::VectorXd::Zero(params.values.size());
  backward(params, cache, w.w_i * li.grad + w.w_pk * pk.grad, w.w_d * ld.grad, out.grad);
  backward(params, cache_warped, w.w_i_warped * li_w.grad, w.w_d * ld.grad_warped, out.grad);
  return out;
}

StepResult train_step(ModelParams& params, Optimizer& opt, const std::vector<TrainSample>& batch,
                      const TrainConfig& cfg) {
  if (batch.empty()) throw std::invalid_argument("train_step: empty batch");
  cfg.validate();
  StepResult result;
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(params.values.size());
  // Fixed summation order keeps runs bit-identical.
  for (const TrainSample& sample : batch) {
    const SampleGradient g = sample_gradient(params, sample, cfg);
    grad += g.grad;
    result.report.l_i += g.report.l_i;
    result.report.l_i_warped += g.report.l_i_warped;
    result.report.l_pk += g.report.l_pk;
    result.report.l_d += g.report.l_d;
    result.report.total += g.report.total;
  }
  const auto n = static_cast<double>(batch.size());
  grad /= n;
  result.report.l_i /= n;
  result.report.l_i_warped /= n;
  result.report.l_pk /= n;
  result.report.l_d /= n;
  result.report.total /= n;
  if (!std::isfinite(result.report.total) || !grad.allFinite()) {
    result.rejected = true;
    return result;
  }
  if (opt.velocity.size() != params.values.size()) opt.velocity = Eigen::VectorXd::Zero(params.values.size());
  opt.velocity = cfg.momentum * opt.velocity - cfg.step_size * grad;
  params.values += opt.velocity;
  return result;
}

void write_training_log(const std::filesystem::path& path, const std::vector<LogRow>& rows) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << "step,l_i,l_i_warped,l_pk,l_d,total\n" << std::setprecision(10);
  for (const LogRow& r : rows) {
    out << r.step << ',' << r.report.l_i << ',' << r.report.l_i_warped << ',' << r.report.l_pk << ','
        << r.report.l_d << ',' << r.report.total << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

RoundReport train_on_frames(const std::vector<TrainSample>& frames, ModelParams& params, Optimizer& opt,
                            const TrainConfig& cfg, int round) {
  if (frames.empty()) throw std::invalid_argument("train_on_frames: no labeled frames");
  cfg.validate();
  RoundReport report;
  report.labeled_frames = static_cast<int>(frames.size());
  HomographyConfig hcfg = cfg.homography;
  hcfg.width = frames.front().image.width;
  hcfg.height = frames.front().image.height;
  std::mt19937_64 rng(cfg.seed * 0x9e3779b97f4a7c15ULL + static_cast<std::uint64_t>(round));
  std::uniform_int_distribution<size_t> pick(0, frames.size() - 1);
  double loss_sum = 0.0;
  int accepted = 0;
  for (int step = 0; step < cfg.steps; ++step) {
    std::vector<TrainSample> batch;
    for (int b = 0; b < cfg.batch_size; ++b) {
      TrainSample sample = frames[pick(rng)];
      sample.h = sample_homography(hcfg, rng());
      batch.push_back(std::move(sample));
    }
    const StepResult r = train_step(params, opt, batch, cfg);
    report.log.push_back({step, r.report});
    if (!r.rejected) {
      loss_sum += r.report.total;
      ++accepted;
    }
  }
  report.mean_loss = accepted > 0 ? loss_sum / accepted : 0.0;
  return report;
}

RoundReport self_supervised_round(const std::vector<GrayImage>& left, const std::vector<GrayImage>& right,
                                  ModelParams& params, Optimizer& opt, const StereoRig& rig,
                                  const RoundConfig& cfg, int round) {
  if (left.size() < 2) throw std::invalid_argument("self_supervised_round: need at least two frames");
  cfg.train.validate();
  RoundReport report;
  const LearnedExtractor extractor(params, cfg.extractor);
  VOResult vo = run_vo(left, right, extractor, rig, cfg.vo);
  report.vo_failures = vo.failure_count();
  const std::vector<GoodFeatureVerdict> verdicts = score_tracks(vo, rig, cfg.supervision);
  for (const auto& v : verdicts) report.good_tracks += v.verdict == Verdict::good ? 1 : 0;
  if (report.good_tracks == 0) {
    throw RoundAborted("self_supervised_round: VO produced no good tracks (" + std::to_string(vo.tracks.size()) +
                       " tracks, " + std::to_string(report.vo_failures) + " failed pairs)");
  }

  std::vector<TrainSample> frames;
  for (size_t f = 0; f < left.size(); ++f) {
    LabelGrid grid = frame_label_grid(vo, verdicts, static_cast<int>(f), left[f].width, left[f].height);
    const bool labeled = std::any_of(grid.labels.begin(), grid.labels.end(), [](int l) { return l != kDustbin; });
    if (labeled) frames.push_back({left[f], std::move(grid), Homography()});
  }
  report.labeled_frames = static_cast<int>(frames.size());

  const RoundReport trained = train_on_frames(frames, params, opt, cfg.train, round);
  report.log = trained.log;
  report.mean_loss = trained.mean_loss;
  return report;
}

}  // namespace gdf
