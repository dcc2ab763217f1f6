#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

#include "gdf/model_train.hpp"

namespace gdf {

namespace {

constexpr double kInputMean = 0.5;
constexpr double kInputGain = 4.0;

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstWeights = Eigen::Map<const RowMajor>;

ConstWeights weights(const Eigen::VectorXd& v, const ModelParams::Block& b) {
  return ConstWeights(v.data() + b.weight, b.rows, b.cols);
}

// 3x3 kernel, stride 2, zero padding 1. Rows are (channel, ky, kx).
Eigen::MatrixXd im2col(const Eigen::MatrixXd& in, int h, int w) {
  const int ho = h / 2, wo = w / 2;
  const auto channels = static_cast<int>(in.rows());
  Eigen::MatrixXd col = Eigen::MatrixXd::Zero(channels * 9, ho * wo);
  for (int oy = 0; oy < ho; ++oy) {
    for (int ox = 0; ox < wo; ++ox) {
      const int j = oy * wo + ox;
      for (int ky = 0; ky < 3; ++ky) {
        const int y = 2 * oy + ky - 1;
        if (y < 0 || y >= h) continue;
        for (int kx = 0; kx < 3; ++kx) {
          const int x = 2 * ox + kx - 1;
          if (x < 0 || x >= w) continue;
          for (int c = 0; c < channels; ++c) col(c * 9 + ky * 3 + kx, j) = in(c, y * w + x);
        }
      }
    }
  }
  return col;
}

Eigen::MatrixXd col2im(const Eigen::MatrixXd& col, int channels, int h, int w) {
  const int ho = h / 2, wo = w / 2;
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(channels, h * w);
  for (int oy = 0; oy < ho; ++oy) {
    for (int ox = 0; ox < wo; ++ox) {
      const int j = oy * wo + ox;
      for (int ky = 0; ky < 3; ++ky) {
        const int y = 2 * oy + ky - 1;
        if (y < 0 || y >= h) continue;
        for (int kx = 0; kx < 3; ++kx) {
          const int x = 2 * ox + kx - 1;
          if (x < 0 || x >= w) continue;
          for (int c = 0; c < channels; ++c) out(c, y * w + x) += col(c * 9 + ky * 3 + kx, j);
        }
      }
    }
  }
  return out;
}

}  // namespace

std::array<ModelParams::Block, 5> ModelParams::layout() const {
  std::array<Block, 5> blocks{};
  Eigen::Index offset = 0;
  const std::array<std::pair<int, int>, 5> shapes{{{kChannels[1], kChannels[0] * 9},
                                                   {kChannels[2], kChannels[1] * 9},
                                                   {kChannels[3], kChannels[2] * 9},
                                                   {kCellChannels, kChannels[3]},
                                                   {dim, kChannels[3]}}};
  for (size_t i = 0; i < shapes.size(); ++i) {
    blocks[i].rows = shapes[i].first;
    blocks[i].cols = shapes[i].second;
    blocks[i].weight = offset;
    offset += static_cast<Eigen::Index>(shapes[i].first) * shapes[i].second;
    blocks[i].bias = offset;
    offset += shapes[i].first;
  }
  return blocks;
}

Eigen::Index ModelParams::count(int dim) {
  ModelParams p;
  p.dim = dim;
  const Block last = p.layout().back();
  return last.bias + last.rows;
}

ModelParams ModelParams::init(int height, int width, int dim, std::uint64_t seed) {
  ModelParams p;
  p.height = height;
  p.width = width;
  p.dim = dim;
  p.values = Eigen::VectorXd::Zero(count(dim));
  std::mt19937_64 rng(seed);
  for (const Block& b : p.layout()) {
    const double a = std::sqrt(1.0 / b.cols);
    std::uniform_real_distribution<double> dist(-a, a);
    for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(b.rows) * b.cols; ++i) p.values(b.weight + i) = dist(rng);
    for (int i = 0; i < b.rows; ++i) p.values(b.bias + i) = dist(rng);
  }
  p.validate();
  return p;
}

void ModelParams::validate() const {
  if (height <= 0 || width <= 0 || height % kCellSize != 0 || width % kCellSize != 0) {
    throw ModelShapeError("model: image size must be positive multiples of 8");
  }
  if (dim < 1) throw ModelShapeError("model: descriptor dimension must be positive");
  if (values.size() != count(dim)) throw ModelShapeError("model: parameter vector has the wrong length");
  if (!values.allFinite()) throw ModelShapeError("model: non-finite parameters");
}

NetworkOutput forward(const ModelParams& params, const GrayImage& img, ForwardCache* cache) {
  if (img.width != params.width || img.height != params.height) {
    throw ModelShapeError("forward: image is " + std::to_string(img.width) + "x" + std::to_string(img.height) +
                          ", model expects " + std::to_string(params.width) + "x" + std::to_string(params.height));
  }
  const auto blocks = params.layout();
  ForwardCache local;
  ForwardCache& c = cache ? *cache : local;
  Eigen::MatrixXd act(1, img.width * img.height);
  for (int i = 0; i < img.width * img.height; ++i) {
    act(0, i) = (img.pixels[static_cast<size_t>(i)] - kInputMean) * kInputGain;
  }
  int h = img.height, w = img.width;
  c.h[0] = h;
  c.w[0] = w;
  for (int l = 0; l < 3; ++l) {
    c.cols[l] = im2col(act, h, w);
    h /= 2;
    w /= 2;
    c.h[l + 1] = h;
    c.w[l + 1] = w;
    Eigen::MatrixXd z = weights(params.values, blocks[l]) * c.cols[l];
    z.colwise() += params.values.segment(blocks[l].bias, blocks[l].rows);
    act = z.array().tanh().matrix();
    c.acts[l] = act;
  }
  NetworkOutput out{ScoreGrid(h, w), DescriptorField(h, w, params.dim)};
  out.scores.logits = weights(params.values, blocks[3]) * act;
  out.scores.logits.colwise() += params.values.segment(blocks[3].bias, blocks[3].rows);
  out.descriptors.desc = weights(params.values, blocks[4]) * act;
  out.descriptors.desc.colwise() += params.values.segment(blocks[4].bias, blocks[4].rows);
  return out;
}

void backward(const ModelParams& params, const ForwardCache& cache, const Eigen::MatrixXd& d_logits,
              const Eigen::MatrixXd& d_desc, Eigen::VectorXd& grad) {
  const auto blocks = params.layout();
  if (grad.size() != params.values.size()) grad = Eigen::VectorXd::Zero(params.values.size());
  auto add_block = [&](const ModelParams::Block& b, const Eigen::MatrixXd& dz, const Eigen::MatrixXd& input) {
    const RowMajor dw = dz * input.transpose();
    grad.segment(b.weight, static_cast<Eigen::Index>(b.rows) * b.cols) +=
        Eigen::Map<const Eigen::VectorXd>(dw.data(), dw.size());
    grad.segment(b.bias, b.rows) += dz.rowwise().sum();
  };
  const Eigen::MatrixXd& top = cache.acts[2];
  add_block(blocks[3], d_logits, top);
  add_block(blocks[4], d_desc, top);
  Eigen::MatrixXd d_act = weights(params.values, blocks[3]).transpose() * d_logits +
                          weights(params.values, blocks[4]).transpose() * d_desc;
  for (int l = 2; l >= 0; --l) {
    const Eigen::MatrixXd dz = (d_act.array() * (1.0 - cache.acts[l].array().square())).matrix();
    add_block(blocks[l], dz, cache.cols[l]);
    if (l == 0) break;
    const Eigen::MatrixXd d_col = weights(params.values, blocks[l]).transpose() * dz;
    d_act = col2im(d_col, ModelParams::kChannels[l], cache.h[l], cache.w[l]);
  }
}

namespace {

constexpr char kMagic[8] = {'G', 'D', 'F', 'N', 'E', 'T', '0', '1'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put_le(std::ofstream& out, T v) {
  unsigned char b[sizeof(T)];
  for (size_t i = 0; i < sizeof(T); ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(b), sizeof(T));
}

template <typename T>
T get_le(std::ifstream& in) {
  unsigned char b[sizeof(T)] = {};
  in.read(reinterpret_cast<char*>(b), sizeof(T));
  T v = 0;
  for (size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(b[i]) << (8 * i);
  return v;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params) {
  params.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out.write(kMagic, sizeof kMagic);
  put_le<std::uint32_t>(out, kVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(params.height));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(params.width));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(params.dim));
  put_le<std::uint64_t>(out, static_cast<std::uint64_t>(params.values.size()));
  for (Eigen::Index i = 0; i < params.values.size(); ++i) {
    const auto f = static_cast<float>(params.values(i));
    std::uint32_t bits = 0;
    std::memcpy(&bits, &f, sizeof bits);
    put_le<std::uint32_t>(out, bits);
  }
  if (!out) throw IoError("write failed: " + path.string());
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path.string());
  char magic[8] = {};
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0) throw IoError("not a checkpoint: " + path.string());
  if (get_le<std::uint32_t>(in) != kVersion) throw IoError("unsupported checkpoint version: " + path.string());
  ModelParams p;
  p.height = static_cast<int>(get_le<std::uint32_t>(in));
  p.width = static_cast<int>(get_le<std::uint32_t>(in));
  p.dim = static_cast<int>(get_le<std::uint32_t>(in));
  const auto n = get_le<std::uint64_t>(in);
  if (!in || p.dim < 1 || n != static_cast<std::uint64_t>(ModelParams::count(p.dim))) {
    throw IoError("checkpoint shape header is inconsistent: " + path.string());
  }
  p.values.resize(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < p.values.size(); ++i) {
    const std::uint32_t bits = get_le<std::uint32_t>(in);
    float f = 0;
    std::memcpy(&f, &bits, sizeof f);
    p.values(i) = f;
  }
  if (!in) throw IoError("checkpoint truncated: " + path.string());
  p.validate();
  return p;
}

std::vector<Keypoint> LearnedExtractor::extract(const GrayImage& img) const {
  const NetworkOutput net = forward(params_, img);
  DenseScoreMap map = decode_scores(net.scores);
  suppress_border(map, cfg_.border);
  std::vector<Keypoint> out;
  for (const auto& p : nms(map, cfg_.nms_radius, cfg_.threshold, cfg_.max_keypoints)) {
    out.push_back({p.x, p.y, p.score, sample_descriptor(net.descriptors, p.x, p.y).unit});
  }
  return out;
}

}  // namespace gdf
