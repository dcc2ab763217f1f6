#pragma once

// Deliberately naive reference implementations. They share no code with the
// library beyond plain data types.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "gdf/matcher_vo.hpp"
#include "gdf/supervision.hpp"

namespace gdf::oracle {

// Repeatedly takes the best remaining pixel (score, then y, then x) that no
// kept pixel covers.
inline std::vector<ScoredPixel> nms(const DenseScoreMap& map, int radius, double threshold, int max_n) {
  std::vector<ScoredPixel> kept;
  std::vector<bool> used(map.probs.size(), false);
  while (static_cast<int>(kept.size()) < max_n) {
    int bx = -1, by = -1;
    for (int y = 0; y < map.height; ++y) {
      for (int x = 0; x < map.width; ++x) {
        if (used[static_cast<size_t>(y * map.width + x)] || !(map.at(x, y) > threshold)) continue;
        bool covered = false;
        for (const auto& k : kept) covered = covered || (std::abs(k.x - x) <= radius && std::abs(k.y - y) <= radius);
        if (covered) continue;
        if (bx < 0 || map.at(x, y) > map.at(bx, by)) {
          bx = x;
          by = y;
        }
      }
    }
    if (bx < 0) break;
    used[static_cast<size_t>(by * map.width + bx)] = true;
    kept.push_back({bx, by, map.at(bx, by)});
  }
  return kept;
}

struct Best {
  int index = -1;
  double d1 = std::numeric_limits<double>::infinity();
  double d2 = std::numeric_limits<double>::infinity();
  int candidates = 0;
  bool accepted(double ratio) const { return index >= 0 && (candidates < 2 || d1 < ratio * d2); }
};

inline Best best_of(const Eigen::VectorXd& q, const std::vector<Keypoint>& pool,
                    const std::function<bool(int)>& allowed) {
  Best b;
  for (int j = 0; j < static_cast<int>(pool.size()); ++j) {
    if (!allowed(j)) continue;
    ++b.candidates;
    const double d = (q - pool[static_cast<size_t>(j)].descriptor).norm();
    if (d < b.d1) {
      b.d2 = b.d1;
      b.d1 = d;
      b.index = j;
    } else if (d < b.d2) {
      b.d2 = d;
    }
  }
  return b;
}

inline std::vector<Match> match(const std::vector<Keypoint>& a, const std::vector<Keypoint>& b, double ratio,
                                bool mutual, const CandidateGate& gate = {}) {
  auto ok = [&](int i, int j) { return !gate || gate(i, j); };
  std::vector<Match> out;
  for (int i = 0; i < static_cast<int>(a.size()); ++i) {
    const Best f = best_of(a[static_cast<size_t>(i)].descriptor, b, [&](int j) { return ok(i, j); });
    if (!f.accepted(ratio)) continue;
    if (mutual) {
      const Best r = best_of(b[static_cast<size_t>(f.index)].descriptor, a, [&](int k) { return ok(k, f.index); });
      if (r.index != i || !r.accepted(ratio)) continue;
    }
    out.push_back({i, f.index, a[static_cast<size_t>(i)].descriptor.dot(b[static_cast<size_t>(f.index)].descriptor)});
  }
  if (mutual) return out;
  // Several queries may claim one target: the most similar, then the earliest, keeps it.
  std::vector<Match> unique;
  for (const Match& m : out) {
    bool beaten = false;
    for (const Match& o : out) {
      if (o.idx_b != m.idx_b || o.idx_a == m.idx_a) continue;
      beaten = beaten || o.similarity > m.similarity || (o.similarity == m.similarity && o.idx_a < m.idx_a);
    }
    if (!beaten) unique.push_back(m);
  }
  return unique;
}

inline bool inside(const Vec2& p, int w, int h) {
  return p.x() >= 0 && p.y() >= 0 && p.x() <= w - 1 && p.y() <= h - 1;
}

// Compares every target cell, not just the neighbourhood of the mapped center.
inline CorrespondenceMatrix correspondence(const Homography& h, int width, int height, double eps) {
  CorrespondenceMatrix m;
  m.hc = height / 8;
  m.wc = width / 8;
  const int n = m.hc * m.wc;
  m.partner.assign(static_cast<size_t>(n), -1);
  m.valid_source.assign(static_cast<size_t>(n), 0);
  m.valid_target.assign(static_cast<size_t>(n), 0);
  auto center = [&](int cell) { return Vec2((cell % m.wc) * 8 + 3.5, (cell / m.wc) * 8 + 3.5); };
  for (int t = 0; t < n; ++t) {
    bool all = true;
    for (int corner = 0; corner < 4; ++corner) {
      const Vec2 q((t % m.wc) * 8 + 7 * (corner & 1), (t / m.wc) * 8 + 7 * (corner >> 1));
      all = all && inside(h.inverse().apply(q), width, height);
    }
    m.valid_target[static_cast<size_t>(t)] = all;
  }
  for (int c = 0; c < n; ++c) {
    const Vec2 p = h.apply(center(c));
    if (!inside(p, width, height)) continue;
    m.valid_source[static_cast<size_t>(c)] = 1;
    int best = -1;
    double best_d = 0.0;
    for (int t = 0; t < n; ++t) {
      const double d = (p - center(t)).norm();
      if (best < 0 || d < best_d) {
        best = t;
        best_d = d;
      }
    }
    if (best_d <= eps && m.valid_target[static_cast<size_t>(best)]) m.partner[static_cast<size_t>(c)] = best;
  }
  return m;
}

inline Eigen::VectorXd unit_or_e0(const Eigen::VectorXd& v) {
  if (v.norm() < 1e-12) return Eigen::VectorXd::Unit(v.size(), 0);
  return v / v.norm();
}

inline double hinge(const Eigen::MatrixXd& d, const Eigen::MatrixXd& dw, const CorrespondenceMatrix& s, double m_p,
                    double m_n, double lambda) {
  double total = 0.0;
  int pairs = 0;
  for (int c = 0; c < s.cells(); ++c) {
    if (!s.valid_source[static_cast<size_t>(c)]) continue;
    for (int t = 0; t < s.cells(); ++t) {
      if (!s.valid_target[static_cast<size_t>(t)]) continue;
      const double sim = unit_or_e0(d.col(c)).dot(unit_or_e0(dw.col(t)));
      total += s.s(c, t) ? lambda * std::max(0.0, m_p - sim) : std::max(0.0, sim - m_n);
      ++pairs;
    }
  }
  return pairs ? total / pairs : 0.0;
}

}  // namespace gdf::oracle
