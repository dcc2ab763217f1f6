#include <algorithm>
#include <cmath>
#include <limits>

#include "gdf/matcher_vo.hpp"

namespace gdf {

namespace {

struct Nearest {
  int best = -1;
  double best_sim = -std::numeric_limits<double>::infinity();
  double second_sim = -std::numeric_limits<double>::infinity();
  int candidates = 0;

  void offer(int idx, double sim) {
    ++candidates;
    if (sim > best_sim) {
      second_sim = best_sim;
      best_sim = sim;
      best = idx;
    } else if (sim > second_sim) {
      second_sim = sim;
    }
  }

  bool passes_ratio(double ratio) const {
    if (best < 0) return false;
    if (candidates < 2) return true;
    const double d1 = std::sqrt(std::max(0.0, 2.0 - 2.0 * best_sim));
    const double d2 = std::sqrt(std::max(0.0, 2.0 - 2.0 * second_sim));
    return d1 < ratio * d2;
  }
};

Eigen::MatrixXd stack(const std::vector<Keypoint>& kps) {
  if (kps.empty()) return {};
  Eigen::MatrixXd m(kps.front().descriptor.size(), static_cast<Eigen::Index>(kps.size()));
  for (size_t i = 0; i < kps.size(); ++i) m.col(static_cast<Eigen::Index>(i)) = kps[i].descriptor;
  return m;
}

}  // namespace

std::vector<Match> match_descriptors(const std::vector<Keypoint>& a, const std::vector<Keypoint>& b,
                                     double ratio, bool mutual, const CandidateGate& gate) {
  std::vector<Match> out;
  if (a.empty() || b.empty()) return out;
  const Eigen::MatrixXd sims = stack(a).transpose() * stack(b);
  const int na = static_cast<int>(a.size()), nb = static_cast<int>(b.size());
  std::vector<Nearest> forward(static_cast<size_t>(na)), backward(static_cast<size_t>(nb));
  for (int i = 0; i < na; ++i) {
    for (int j = 0; j < nb; ++j) {
      if (gate && !gate(i, j)) continue;
      forward[static_cast<size_t>(i)].offer(j, sims(i, j));
      backward[static_cast<size_t>(j)].offer(i, sims(i, j));
    }
  }
  std::vector<int> taken(static_cast<size_t>(nb), -1);
  for (int i = 0; i < na; ++i) {
    const Nearest& f = forward[static_cast<size_t>(i)];
    if (!f.passes_ratio(ratio)) continue;
    if (mutual) {
      const Nearest& r = backward[static_cast<size_t>(f.best)];
      if (r.best != i || !r.passes_ratio(ratio)) continue;
    }
    out.push_back({i, f.best, f.best_sim});
  }
  if (!mutual) {
    // One keypoint of b may be claimed by several queries; keep the most similar.
    for (size_t k = 0; k < out.size(); ++k) {
      int& owner = taken[static_cast<size_t>(out[k].idx_b)];
      if (owner < 0 || out[k].similarity > out[static_cast<size_t>(owner)].similarity) owner = static_cast<int>(k);
    }
    std::vector<Match> unique;
    for (size_t k = 0; k < out.size(); ++k) {
      if (taken[static_cast<size_t>(out[k].idx_b)] == static_cast<int>(k)) unique.push_back(out[k]);
    }
    out = std::move(unique);
  }
  return out;
}

double refine_disparity(const GrayImage& left_img, const GrayImage& right_img, int left_x, int left_y,
                        int right_x, int half, int search) {
  auto cost = [&](int dx) {
    double sum = 0.0;
    for (int v = -half; v <= half; ++v) {
      const int yy = std::clamp(left_y + v, 0, left_img.height - 1);
      for (int u = -half; u <= half; ++u) {
        const double a = left_img.at(std::clamp(left_x + u, 0, left_img.width - 1), yy);
        const double b = right_img.at(std::clamp(right_x + dx + u, 0, right_img.width - 1), yy);
        sum += (a - b) * (a - b);
      }
    }
    return sum;
  };
  std::vector<double> costs;
  for (int dx = -search; dx <= search; ++dx) costs.push_back(cost(dx));
  const auto best = static_cast<int>(std::min_element(costs.begin(), costs.end()) - costs.begin());
  if (best == 0 || best == static_cast<int>(costs.size()) - 1) return right_x;
  const double cm = costs[static_cast<size_t>(best - 1)], c0 = costs[static_cast<size_t>(best)],
               cp = costs[static_cast<size_t>(best + 1)];
  // An exact patch match is already at the true column.
  if (c0 <= 1e-12) return right_x + (best - search);
  const double denom = cm - 2.0 * c0 + cp;
  const double offset = denom > 1e-15 ? std::clamp(0.5 * (cm - cp) / denom, -0.5, 0.5) : 0.0;
  return right_x + (best - search) + offset;
}

std::vector<StereoMatch> stereo_match(const std::vector<Keypoint>& left, const std::vector<Keypoint>& right,
                                      const StereoRig& rig, const StereoMatchConfig& cfg,
                                      const GrayImage* left_img, const GrayImage* right_img) {
  const CandidateGate gate = [&](int i, int j) {
    const auto& l = left[static_cast<size_t>(i)];
    const auto& r = right[static_cast<size_t>(j)];
    const double disparity = l.x - r.x;
    return std::abs(l.y - r.y) <= cfg.band && disparity > 0.0 && disparity <= cfg.max_disparity;
  };
  const StereoGate tri_gate{cfg.min_disparity, cfg.band};
  std::vector<StereoMatch> out;
  for (const Match& m : match_descriptors(left, right, cfg.ratio, cfg.mutual, gate)) {
    const auto& l = left[static_cast<size_t>(m.idx_a)];
    const auto& r = right[static_cast<size_t>(m.idx_b)];
    Vec2 right_pix(r.x, r.y);
    if (left_img && right_img && cfg.refine_half > 0) {
      right_pix = Vec2(refine_disparity(*left_img, *right_img, l.x, l.y, r.x, cfg.refine_half, cfg.refine_search),
                       l.y);
    }
    const Triangulation tri = triangulate_rectified(rig, Vec2(l.x, l.y), right_pix, tri_gate);
    StereoMatch sm{m, std::nullopt, right_pix};
    if (tri.ok()) sm.depth = tri.depth;
    out.push_back(sm);
  }
  return out;
}

}  // namespace gdf
