#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "gdf/features.hpp"
#include "gdf/geometry.hpp"
#include "gdf/supervision.hpp"

namespace gdf {

class ModelShapeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Three 3x3 stride-2 convolutions (1->16->32->64, tanh) reaching 1/8
/// resolution, then 1x1 detector (64->65) and descriptor (64->dim) heads.
/// Pixels enter as 4 * (p - 0.5). All weights live in one flat vector; see
/// `layout()` for the order.
struct ModelParams {
  static constexpr std::array<int, 4> kChannels{1, 16, 32, 64};

  int height = 192;
  int width = 256;
  int dim = 64;
  Eigen::VectorXd values;

  struct Block {
    Eigen::Index weight = 0;  // offset of a rows x cols row-major weight matrix
    Eigen::Index bias = 0;
    int rows = 0;
    int cols = 0;
  };
  /// conv1, conv2, conv3, detector head, descriptor head.
  std::array<Block, 5> layout() const;
  static Eigen::Index count(int dim);

  /// Uniform in [-a, a] with a = sqrt(1 / fan_in), biases included.
  static ModelParams init(int height, int width, int dim, std::uint64_t seed);
  void validate() const;
};

struct ForwardCache {
  std::array<Eigen::MatrixXd, 3> cols;  // im2col input of each conv
  std::array<Eigen::MatrixXd, 3> acts;  // tanh output of each conv, C x (h*w)
  std::array<int, 4> h{};
  std::array<int, 4> w{};
};

struct NetworkOutput {
  ScoreGrid scores;
  DescriptorField descriptors;
};

NetworkOutput forward(const ModelParams& params, const GrayImage& img, ForwardCache* cache = nullptr);

/// Accumulates dLoss/dparams into `grad` given the loss gradients of both heads.
void backward(const ModelParams& params, const ForwardCache& cache, const Eigen::MatrixXd& d_logits,
              const Eigen::MatrixXd& d_desc, Eigen::VectorXd& grad);

/// Binary layout: 8-byte magic "GDFNET01", uint32 version, uint32 height,
/// width, dim, uint64 parameter count, then float32 parameters in layout
/// order. All integers and floats little-endian.
void save_checkpoint(const std::filesystem::path& path, const ModelParams& params);
ModelParams load_checkpoint(const std::filesystem::path& path);

class LearnedExtractor : public FeatureExtractor {
 public:
  LearnedExtractor(ModelParams params, ExtractorConfig cfg = {}) : params_(std::move(params)), cfg_(cfg) {}
  std::vector<Keypoint> extract(const GrayImage& img) const override;
  std::string name() const override { return "learned"; }
  const ModelParams& params() const { return params_; }

 private:
  ModelParams params_;
  ExtractorConfig cfg_;
};

struct LossValue {
  double value = 0.0;
  bool empty = false;     // no cells contributed
  int fallbacks = 0;      // zero-norm descriptors replaced by e0
  Eigen::MatrixXd grad;   // same shape as the differentiated input
};

/// Mean 65-way cross-entropy over cells with `valid` set.
LossValue detector_loss(const ScoreGrid& x, const LabelGrid& y, const std::vector<std::uint8_t>& valid);

/// Mean of 1 - max spatial probability over keypoint-labeled cells.
LossValue peaky_loss(const ScoreGrid& x, const LabelGrid& y);

struct HingeParams {
  double m_p = 1.0;
  double m_n = 0.2;
  double lambda_d = 250.0;
};

/// Mean over valid cell pairs of lambda*s*max(0, m_p - sim) + (1-s)*max(0, sim - m_n)
/// on normalized cell descriptors. `grad` holds d/d(d) and `grad_warped` d/d(d').
struct HingeValue {
  double value = 0.0;
  bool empty = false;
  int fallbacks = 0;
  Eigen::MatrixXd grad;
  Eigen::MatrixXd grad_warped;
};
HingeValue descriptor_hinge_loss(const DescriptorField& d, const DescriptorField& d_warped,
                                 const CorrespondenceMatrix& s, const HingeParams& hp = {});

struct LossWeights {
  double w_i = 1.0;
  double w_i_warped = 1.0;
  double w_pk = 0.25;
  double w_d = 0.5;

  void validate() const;
};

struct LossReport {
  double l_i = 0.0;
  double l_i_warped = 0.0;
  double l_pk = 0.0;
  double l_d = 0.0;
  double total = 0.0;
};

LossReport total_loss(double l_i, double l_i_warped, double l_pk, double l_d, const LossWeights& w);

struct TrainConfig {
  double step_size = 3e-2;
  double momentum = 0.9;
  int steps = 100;
  int batch_size = 4;
  std::uint64_t seed = 1;
  HingeParams hinge;
  LossWeights weights;
  double eps_cell = 8.0;
  HomographyConfig homography;

  void validate() const;
};

struct TrainSample {
  GrayImage image;
  LabelGrid labels;
  Homography h;
};

/// Loss and parameter gradient of one sample; both forward passes included.
struct SampleGradient {
  LossReport report;
  Eigen::VectorXd grad;
};
SampleGradient sample_gradient(const ModelParams& params, const TrainSample& sample, const TrainConfig& cfg);

struct Optimizer {
  Eigen::VectorXd velocity;
};

struct StepResult {
  LossReport report;  // batch mean, before the update
  bool rejected = false;
};

/// One momentum step on the batch mean loss. Non-finite loss or gradient
/// leaves params and velocity untouched and sets `rejected`.
StepResult train_step(ModelParams& params, Optimizer& opt, const std::vector<TrainSample>& batch,
                      const TrainConfig& cfg);

struct LogRow {
  int step = 0;
  LossReport report;
};
void write_training_log(const std::filesystem::path& path, const std::vector<LogRow>& rows);

struct RoundConfig {
  VoConfig vo;
  SupervisionConfig supervision;
  ExtractorConfig extractor;
  TrainConfig train;
};

struct RoundReport {
  int vo_failures = 0;
  int good_tracks = 0;
  int labeled_frames = 0;
  double mean_loss = 0.0;
  std::vector<LogRow> log;
};

class RoundAborted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// `cfg.steps` momentum steps over batches drawn uniformly from `frames`, each
/// sample with a fresh homography. `round` decorrelates successive calls.
RoundReport train_on_frames(const std::vector<TrainSample>& frames, ModelParams& params, Optimizer& opt,
                            const TrainConfig& cfg, int round = 0);

/// VO with the current network, track scoring, label grids, then
/// `train_on_frames` over every frame holding at least one good keypoint.
RoundReport self_supervised_round(const std::vector<GrayImage>& left, const std::vector<GrayImage>& right,
                                  ModelParams& params, Optimizer& opt, const StereoRig& rig,
                                  const RoundConfig& cfg, int round = 0);

}  // namespace gdf
