#pragma once

#include <Eigen/Core>
#include <array>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "gdf/image.hpp"

namespace gdf {

inline constexpr int kCellSize = 8;
inline constexpr int kCellChannels = 65;
inline constexpr int kDustbin = 64;

/// Raw detector logits: one 65-vector per 8x8 cell, stored as a 65 x (hc*wc)
/// matrix whose column index is row * wc + col. Channel 64 is the dustbin.
struct ScoreGrid {
  int hc = 0;
  int wc = 0;
  Eigen::MatrixXd logits;

  ScoreGrid() = default;
  ScoreGrid(int rows, int cols) : hc(rows), wc(cols), logits(Eigen::MatrixXd::Zero(kCellChannels, rows * cols)) {}
  int cells() const { return hc * wc; }
};

/// Decoded per-pixel keypoint probabilities plus each cell's dustbin probability.
struct DenseScoreMap {
  int width = 0;
  int height = 0;
  std::vector<double> probs;
  std::vector<double> dustbin;  // per cell, row-major

  double at(int x, int y) const { return probs[static_cast<size_t>(y) * width + x]; }
};

/// Semi-dense descriptors: dim x (hc*wc), not normalized.
struct DescriptorField {
  int hc = 0;
  int wc = 0;
  int dim = 0;
  Eigen::MatrixXd desc;

  DescriptorField() = default;
  DescriptorField(int rows, int cols, int d)
      : hc(rows), wc(cols), dim(d), desc(Eigen::MatrixXd::Zero(d, rows * cols)) {}
  int cells() const { return hc * wc; }
};

struct ScoredPixel {
  int x = 0;
  int y = 0;
  double score = 0.0;
  bool operator==(const ScoredPixel&) const = default;
};

struct Keypoint {
  int x = 0;
  int y = 0;
  double score = 0.0;
  Eigen::VectorXd descriptor;  // unit norm
};

DenseScoreMap decode_scores(const ScoreGrid& grid);

/// Greedy Chebyshev-radius suppression, highest score first, ties by (y, x).
std::vector<ScoredPixel> nms(const DenseScoreMap& map, int radius, double threshold, int max_n);

struct DescriptorSample {
  Eigen::VectorXd unit;
  bool fallback = false;  // interpolated vector was zero; e0 substituted
  std::array<int, 4> cells{};
  std::array<double, 4> weights{};
  double norm = 0.0;
};

/// Bilinear interpolation at cell-center coordinates ((x - 3.5) / 8, (y - 3.5) / 8),
/// clamped to the grid, followed by normalization.
DescriptorSample sample_descriptor(const DescriptorField& field, double x, double y);

/// Accumulates d(upstream . sample)/d(field) into `grad` (same shape as field).
void sample_descriptor_backward(const DescriptorSample& sample, const Eigen::VectorXd& upstream,
                                DescriptorField& grad);

/// Min-eigenvalue corner response normalized to [0, 1] by the image maximum.
DenseScoreMap classical_corner_map(const GrayImage& img, int window);

/// Zero-mean, unit-variance 11x11 intensity patch, then scaled to unit norm.
Eigen::VectorXd patch_descriptor(const GrayImage& img, int x, int y, int half = 5);

struct ExtractorConfig {
  int nms_radius = 4;
  double threshold = 0.015;
  int max_keypoints = 500;
  int border = 4;
  int corner_window = 5;
};

class FeatureExtractor {
 public:
  virtual ~FeatureExtractor() = default;
  virtual std::vector<Keypoint> extract(const GrayImage& img) const = 0;
  virtual std::string name() const = 0;
};

/// Corner-map baseline with patch descriptors.
class ClassicalExtractor : public FeatureExtractor {
 public:
  explicit ClassicalExtractor(ExtractorConfig cfg = {}) : cfg_(cfg) {}
  std::vector<Keypoint> extract(const GrayImage& img) const override;
  std::string name() const override { return "classical"; }

 private:
  ExtractorConfig cfg_;
};

/// Clears scores within `border` pixels of the image edge.
void suppress_border(DenseScoreMap& map, int border);

struct FrameKeypoints {
  int frame = 0;
  std::vector<Keypoint> keypoints;
};

/// CSV `frame,x,y,score` plus a float32 little-endian descriptor sidecar (D per row).
void write_keypoint_dump(const std::filesystem::path& csv_path, const std::filesystem::path& desc_path,
                         const std::vector<FrameKeypoints>& frames);
std::vector<FrameKeypoints> read_keypoint_dump(const std::filesystem::path& csv_path,
                                               const std::filesystem::path& desc_path, int dim);

}  // namespace gdf
