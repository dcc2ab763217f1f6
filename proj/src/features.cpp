#include "gdf/features.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace gdf {

DenseScoreMap decode_scores(const ScoreGrid& grid) {
  DenseScoreMap map;
  map.width = grid.wc * kCellSize;
  map.height = grid.hc * kCellSize;
  map.probs.assign(static_cast<size_t>(map.width) * map.height, 0.0);
  map.dustbin.assign(static_cast<size_t>(grid.cells()), 0.0);
  for (int r = 0; r < grid.hc; ++r) {
    for (int c = 0; c < grid.wc; ++c) {
      const int cell = r * grid.wc + c;
      const auto col = grid.logits.col(cell);
      const double peak = col.maxCoeff();
      const Eigen::VectorXd e = (col.array() - peak).exp();
      const double inv = 1.0 / e.sum();
      for (int k = 0; k < kDustbin; ++k) {
        const int x = c * kCellSize + k % kCellSize;
        const int y = r * kCellSize + k / kCellSize;
        map.probs[static_cast<size_t>(y) * map.width + x] = e(k) * inv;
      }
      map.dustbin[static_cast<size_t>(cell)] = e(kDustbin) * inv;
    }
  }
  return map;
}

std::vector<ScoredPixel> nms(const DenseScoreMap& map, int radius, double threshold, int max_n) {
  if (radius < 1) throw std::invalid_argument("nms: radius must be >= 1");
  std::vector<ScoredPixel> candidates;
  for (int y = 0; y < map.height; ++y) {
    for (int x = 0; x < map.width; ++x) {
      const double s = map.at(x, y);
      if (s > threshold) candidates.push_back({x, y, s});
    }
  }
  std::sort(candidates.begin(), candidates.end(), [](const ScoredPixel& a, const ScoredPixel& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.y != b.y) return a.y < b.y;
    return a.x < b.x;
  });
  std::vector<std::uint8_t> blocked(static_cast<size_t>(map.width) * map.height, 0);
  std::vector<ScoredPixel> kept;
  for (const auto& cand : candidates) {
    if (static_cast<int>(kept.size()) >= max_n) break;
    if (blocked[static_cast<size_t>(cand.y) * map.width + cand.x]) continue;
    kept.push_back(cand);
    for (int y = std::max(0, cand.y - radius); y <= std::min(map.height - 1, cand.y + radius); ++y) {
      for (int x = std::max(0, cand.x - radius); x <= std::min(map.width - 1, cand.x + radius); ++x) {
        blocked[static_cast<size_t>(y) * map.width + x] = 1;
      }
    }
  }
  return kept;
}

DescriptorSample sample_descriptor(const DescriptorField& field, double x, double y) {
  DescriptorSample s;
  const double gx = std::clamp((x - 3.5) / kCellSize, 0.0, static_cast<double>(field.wc - 1));
  const double gy = std::clamp((y - 3.5) / kCellSize, 0.0, static_cast<double>(field.hc - 1));
  const int x0 = std::min(static_cast<int>(std::floor(gx)), std::max(field.wc - 2, 0));
  const int y0 = std::min(static_cast<int>(std::floor(gy)), std::max(field.hc - 2, 0));
  const int x1 = std::min(x0 + 1, field.wc - 1);
  const int y1 = std::min(y0 + 1, field.hc - 1);
  const double ax = gx - x0, ay = gy - y0;
  s.cells = {y0 * field.wc + x0, y0 * field.wc + x1, y1 * field.wc + x0, y1 * field.wc + x1};
  s.weights = {(1 - ax) * (1 - ay), ax * (1 - ay), (1 - ax) * ay, ax * ay};
  Eigen::VectorXd v = Eigen::VectorXd::Zero(field.dim);
  for (int k = 0; k < 4; ++k) {
    if (s.weights[k] != 0.0) v += s.weights[k] * field.desc.col(s.cells[k]);
  }
  s.norm = v.norm();
  if (s.norm < 1e-12) {
    s.fallback = true;
    s.unit = Eigen::VectorXd::Unit(field.dim, 0);
  } else {
    s.unit = v / s.norm;
  }
  return s;
}

void sample_descriptor_backward(const DescriptorSample& sample, const Eigen::VectorXd& upstream,
                                DescriptorField& grad) {
  if (sample.fallback) return;
  const Eigen::VectorXd dv = (upstream - sample.unit * sample.unit.dot(upstream)) / sample.norm;
  for (int k = 0; k < 4; ++k) {
    if (sample.weights[k] != 0.0) grad.desc.col(sample.cells[k]) += sample.weights[k] * dv;
  }
}

DenseScoreMap classical_corner_map(const GrayImage& img, int window) {
  if (window < 3 || window % 2 == 0) throw std::invalid_argument("corner map: window must be odd and >= 3");
  const int w = img.width, h = img.height;
  std::vector<double> ixx(static_cast<size_t>(w) * h), iyy(ixx.size()), ixy(ixx.size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double gx = 0.5 * (img.at(std::min(x + 1, w - 1), y) - img.at(std::max(x - 1, 0), y));
      const double gy = 0.5 * (img.at(x, std::min(y + 1, h - 1)) - img.at(x, std::max(y - 1, 0)));
      const size_t i = static_cast<size_t>(y) * w + x;
      ixx[i] = gx * gx;
      iyy[i] = gy * gy;
      ixy[i] = gx * gy;
    }
  }
  const int half = window / 2;
  DenseScoreMap map;
  map.width = w;
  map.height = h;
  map.probs.assign(ixx.size(), 0.0);
  double peak = 0.0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double a = 0, b = 0, c = 0;
      for (int v = std::max(0, y - half); v <= std::min(h - 1, y + half); ++v) {
        for (int u = std::max(0, x - half); u <= std::min(w - 1, x + half); ++u) {
          const size_t i = static_cast<size_t>(v) * w + u;
          a += ixx[i];
          b += ixy[i];
          c += iyy[i];
        }
      }
      const double mean = 0.5 * (a + c);
      const double dev = std::sqrt(0.25 * (a - c) * (a - c) + b * b);
      const double lmin = std::max(0.0, mean - dev);
      map.probs[static_cast<size_t>(y) * w + x] = lmin;
      peak = std::max(peak, lmin);
    }
  }
  if (peak > 0.0) {
    for (double& p : map.probs) p /= peak;
  }
  return map;
}

Eigen::VectorXd patch_descriptor(const GrayImage& img, int x, int y, int half) {
  const int side = 2 * half + 1;
  Eigen::VectorXd v(side * side);
  int k = 0;
  for (int dy = -half; dy <= half; ++dy) {
    for (int dx = -half; dx <= half; ++dx) {
      v(k++) = img.at(std::clamp(x + dx, 0, img.width - 1), std::clamp(y + dy, 0, img.height - 1));
    }
  }
  v.array() -= v.mean();
  const double n = v.norm();
  if (n < 1e-12) return Eigen::VectorXd::Unit(v.size(), 0);
  return v / n;
}

void suppress_border(DenseScoreMap& map, int border) {
  for (int y = 0; y < map.height; ++y) {
    for (int x = 0; x < map.width; ++x) {
      if (x < border || y < border || x >= map.width - border || y >= map.height - border) {
        map.probs[static_cast<size_t>(y) * map.width + x] = 0.0;
      }
    }
  }
}

std::vector<Keypoint> ClassicalExtractor::extract(const GrayImage& img) const {
  DenseScoreMap map = classical_corner_map(img, cfg_.corner_window);
  suppress_border(map, cfg_.border);
  std::vector<Keypoint> out;
  for (const auto& p : nms(map, cfg_.nms_radius, cfg_.threshold, cfg_.max_keypoints)) {
    out.push_back({p.x, p.y, p.score, patch_descriptor(img, p.x, p.y)});
  }
  return out;
}

namespace {

void put_f32(std::ofstream& out, float f) {
  std::uint32_t bits = 0;
  std::memcpy(&bits, &f, sizeof bits);
  const char bytes[4] = {static_cast<char>(bits & 0xff), static_cast<char>((bits >> 8) & 0xff),
                         static_cast<char>((bits >> 16) & 0xff), static_cast<char>((bits >> 24) & 0xff)};
  out.write(bytes, 4);
}

float get_f32(std::ifstream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  const std::uint32_t bits = b[0] | (b[1] << 8) | (b[2] << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
  float f = 0;
  std::memcpy(&f, &bits, sizeof f);
  return f;
}

}  // namespace

void write_keypoint_dump(const std::filesystem::path& csv_path, const std::filesystem::path& desc_path,
                         const std::vector<FrameKeypoints>& frames) {
  std::ofstream csv(csv_path);
  std::ofstream bin(desc_path, std::ios::binary);
  if (!csv || !bin) throw IoError("cannot write keypoint dump " + csv_path.string());
  csv << "frame,x,y,score\n";
  csv.precision(9);
  for (const auto& f : frames) {
    for (const auto& kp : f.keypoints) {
      csv << f.frame << ',' << kp.x << ',' << kp.y << ',' << kp.score << '\n';
      for (Eigen::Index i = 0; i < kp.descriptor.size(); ++i) put_f32(bin, static_cast<float>(kp.descriptor(i)));
    }
  }
  if (!csv || !bin) throw IoError("write failed: " + csv_path.string());
}

std::vector<FrameKeypoints> read_keypoint_dump(const std::filesystem::path& csv_path,
                                               const std::filesystem::path& desc_path, int dim) {
  std::ifstream csv(csv_path);
  std::ifstream bin(desc_path, std::ios::binary);
  if (!csv || !bin) throw IoError("cannot read keypoint dump " + csv_path.string());
  std::string line;
  std::getline(csv, line);
  if (line != "frame,x,y,score") throw IoError("keypoint dump: unexpected header");
  std::vector<FrameKeypoints> frames;
  while (std::getline(csv, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string f, x, y, s;
    std::getline(ss, f, ',');
    std::getline(ss, x, ',');
    std::getline(ss, y, ',');
    std::getline(ss, s, ',');
    Keypoint kp{std::stoi(x), std::stoi(y), std::stod(s), Eigen::VectorXd(dim)};
    for (int i = 0; i < dim; ++i) kp.descriptor(i) = get_f32(bin);
    if (!bin) throw IoError("keypoint dump: descriptor sidecar too short");
    const int frame = std::stoi(f);
    if (frames.empty() || frames.back().frame != frame) frames.push_back({frame, {}});
    frames.back().keypoints.push_back(std::move(kp));
  }
  return frames;
}

}  // namespace gdf
