#include "gdf/supervision.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace gdf {

const char* verdict_name(Verdict v) {
  switch (v) {
    case Verdict::good: return "good";
    case Verdict::bad: return "bad";
    case Verdict::undecided: return "undecided";
  }
  return "undecided";
}

void SupervisionConfig::validate() const {
  if (!(tau_px > 0.0) || min_length < 1 || !(stereo_tau > 0.0) || !(eps_cell > 0.0)) {
    throw std::invalid_argument("SupervisionConfig: thresholds must be positive");
  }
}

namespace {

// Right-image pixel of a left-camera point.
std::optional<Vec2> project_right(const StereoRig& rig, const Vec3& p_left) {
  const Vec3 pr = transform(rig.extrinsic, p_left);
  if (!(pr.z() > 1e-9)) return std::nullopt;
  return project(rig.right, pr);
}

}  // namespace

std::vector<GoodFeatureVerdict> score_tracks(VOResult& vo, const StereoRig& rig, const SupervisionConfig& cfg) {
  cfg.validate();
  if (vo.relative_poses.empty()) throw std::invalid_argument("score_tracks: VO result has no relative poses");
  std::vector<GoodFeatureVerdict> out;
  out.reserve(vo.tracks.size());
  for (Track& track : vo.tracks) {
    GoodFeatureVerdict v;
    v.track_id = track.id;
    v.track_length = static_cast<int>(track.observations.size());
    track.residuals.clear();

    for (const TrackObservation& o : track.observations) {
      if (!o.right || !o.depth) continue;
      const auto r = project_right(rig, unproject(rig.left, o.left, *o.depth));
      if (!r || (*r - *o.right).norm() > cfg.stereo_tau) v.stereo_consistent = false;
    }
    for (size_t k = 0; k + 1 < track.observations.size(); ++k) {
      const TrackObservation& a = track.observations[k];
      const TrackObservation& b = track.observations[k + 1];
      const auto step = static_cast<size_t>(a.frame);
      if (!a.depth || b.frame != a.frame + 1 || step >= vo.relative_poses.size()) continue;
      if (step < vo.failed.size() && vo.failed[step]) continue;
      const Vec3 p = unproject(rig.left, a.left, *a.depth);
      const Residual res = reprojection_residual(rig.left, vo.relative_poses[step], p, b.left);
      if (res.behind_camera) {
        v.behind_camera = true;
        continue;
      }
      track.residuals.push_back(res.value.norm());
    }

    if (!track.residuals.empty()) {
      double sum = 0.0;
      for (double r : track.residuals) sum += r;
      v.mean_residual = sum / static_cast<double>(track.residuals.size());
    }
    if (!v.mean_residual && !v.behind_camera) {
      v.verdict = Verdict::undecided;
    } else if (v.behind_camera || *v.mean_residual > cfg.tau_px || !v.stereo_consistent) {
      v.verdict = Verdict::bad;
    } else if (v.track_length >= cfg.min_length) {
      v.verdict = Verdict::good;
    } else {
      v.verdict = Verdict::undecided;
    }
    out.push_back(v);
  }
  return out;
}

LabelGrid build_label_grid(const std::vector<LabeledPoint>& good, int width, int height) {
  if (width % kCellSize != 0 || height % kCellSize != 0) {
    throw std::invalid_argument("build_label_grid: image size must be divisible by 8");
  }
  LabelGrid grid(height / kCellSize, width / kCellSize);
  std::vector<const LabeledPoint*> owner(static_cast<size_t>(grid.cells()), nullptr);
  auto better = [](const LabeledPoint& a, const LabeledPoint& b) {
    if (a.residual != b.residual) return a.residual < b.residual;
    if (a.y != b.y) return a.y < b.y;
    return a.x < b.x;
  };
  for (const LabeledPoint& p : good) {
    if (p.x < 0 || p.y < 0 || p.x >= width || p.y >= height) {
      throw std::out_of_range("build_label_grid: keypoint outside the image");
    }
    const size_t cell = static_cast<size_t>(p.y / kCellSize) * grid.wc + p.x / kCellSize;
    if (!owner[cell] || better(p, *owner[cell])) owner[cell] = &p;
  }
  for (size_t c = 0; c < owner.size(); ++c) {
    if (owner[c]) grid.labels[c] = (owner[c]->y % kCellSize) * kCellSize + owner[c]->x % kCellSize;
  }
  return grid;
}

void mask_undecided(LabelGrid& grid, const std::vector<Vec2>& undecided) {
  for (const Vec2& p : undecided) {
    const int c = static_cast<int>(std::lround(p.x())) / kCellSize;
    const int r = static_cast<int>(std::lround(p.y())) / kCellSize;
    if (r < 0 || c < 0 || r >= grid.hc || c >= grid.wc) continue;
    const size_t cell = static_cast<size_t>(r) * grid.wc + c;
    if (grid.labels[cell] == kDustbin) grid.supervised[cell] = 0;
  }
}

LabelGrid frame_label_grid(const VOResult& vo, const std::vector<GoodFeatureVerdict>& verdicts, int frame,
                           int width, int height) {
  if (verdicts.size() != vo.tracks.size()) throw std::invalid_argument("frame_label_grid: verdict count mismatch");
  std::vector<LabeledPoint> good;
  std::vector<Vec2> undecided;
  for (size_t i = 0; i < vo.tracks.size(); ++i) {
    for (const TrackObservation& o : vo.tracks[i].observations) {
      if (o.frame != frame) continue;
      const GoodFeatureVerdict& v = verdicts[i];
      if (v.verdict == Verdict::good) {
        good.push_back({static_cast<int>(std::lround(o.left.x())), static_cast<int>(std::lround(o.left.y())),
                        v.mean_residual.value_or(0.0)});
      } else if (v.verdict == Verdict::undecided) {
        undecided.push_back(o.left);
      }
    }
  }
  LabelGrid grid = build_label_grid(good, width, height);
  mask_undecided(grid, undecided);
  return grid;
}

WarpedPair make_warped_pair(const GrayImage& img, const LabelGrid& grid, const Homography& h) {
  WarpResult warp = warp_image(img, h);
  WarpedPair out;
  out.grid = LabelGrid(grid.hc, grid.wc);
  out.valid.assign(static_cast<size_t>(grid.cells()), 0);
  for (int r = 0; r < grid.hc; ++r) {
    for (int c = 0; c < grid.wc; ++c) {
      bool inside = true;
      for (int y = r * kCellSize; y < (r + 1) * kCellSize && inside; ++y) {
        for (int x = c * kCellSize; x < (c + 1) * kCellSize; ++x) {
          if (!warp.valid.at(x, y)) {
            inside = false;
            break;
          }
        }
      }
      out.valid[static_cast<size_t>(r) * grid.wc + c] = inside ? 1 : 0;
    }
  }
  // Source cells are visited row-major; the first keypoint to land in a target cell keeps it.
  for (int r = 0; r < grid.hc; ++r) {
    for (int c = 0; c < grid.wc; ++c) {
      const int label = grid.at(r, c);
      const Vec2 src = label == kDustbin
                           ? Vec2(c * kCellSize + 3.5, r * kCellSize + 3.5)
                           : Vec2(c * kCellSize + label % kCellSize, r * kCellSize + label / kCellSize);
      const Vec2 dst = h.apply(src);
      const long x = std::lround(dst.x()), y = std::lround(dst.y());
      if (x < 0 || y < 0 || x >= img.width || y >= img.height) continue;
      const size_t cell = static_cast<size_t>(y / kCellSize) * grid.wc + static_cast<size_t>(x / kCellSize);
      if (!grid.supervised[static_cast<size_t>(r) * grid.wc + c]) {
        if (out.grid.labels[cell] == kDustbin) out.grid.supervised[cell] = 0;
        continue;
      }
      if (label == kDustbin || !warp.valid.at(static_cast<int>(x), static_cast<int>(y))) continue;
      if (out.grid.labels[cell] != kDustbin) continue;
      out.grid.labels[cell] = static_cast<int>((y % kCellSize) * kCellSize + x % kCellSize);
      out.grid.supervised[cell] = 1;
    }
  }
  out.image = std::move(warp.image);
  return out;
}

CorrespondenceMatrix build_correspondence_matrix(const Homography& h, int width, int height, double eps_cell) {
  if (width % kCellSize != 0 || height % kCellSize != 0) {
    throw std::invalid_argument("build_correspondence_matrix: image size must be divisible by 8");
  }
  if (!(eps_cell > 0.0)) throw std::invalid_argument("build_correspondence_matrix: eps must be positive");
  CorrespondenceMatrix m;
  m.hc = height / kCellSize;
  m.wc = width / kCellSize;
  const auto n = static_cast<size_t>(m.cells());
  m.partner.assign(n, -1);
  m.valid_source.assign(n, 0);
  m.valid_target.assign(n, 0);
  const Homography inv = h.inverse();
  auto in_image = [&](const Vec2& p) {
    return p.x() >= 0.0 && p.y() >= 0.0 && p.x() <= width - 1.0 && p.y() <= height - 1.0;
  };
  for (int r = 0; r < m.hc; ++r) {
    for (int c = 0; c < m.wc; ++c) {
      const double x0 = c * kCellSize, y0 = r * kCellSize, x1 = x0 + kCellSize - 1, y1 = y0 + kCellSize - 1;
      const bool inside = in_image(inv.apply(Vec2(x0, y0))) && in_image(inv.apply(Vec2(x1, y0))) &&
                          in_image(inv.apply(Vec2(x0, y1))) && in_image(inv.apply(Vec2(x1, y1)));
      m.valid_target[static_cast<size_t>(r) * m.wc + c] = inside ? 1 : 0;
    }
  }
  for (int r = 0; r < m.hc; ++r) {
    for (int c = 0; c < m.wc; ++c) {
      const size_t cell = static_cast<size_t>(r) * m.wc + c;
      const Vec2 p = h.apply(Vec2(c * kCellSize + 3.5, r * kCellSize + 3.5));
      if (!in_image(p)) continue;
      m.valid_source[cell] = 1;
      // Only the four centers around p can be nearest.
      const double gx = (p.x() - 3.5) / kCellSize, gy = (p.y() - 3.5) / kCellSize;
      int best = -1;
      double best_d = std::numeric_limits<double>::infinity();
      for (int rr = static_cast<int>(std::floor(gy)); rr <= static_cast<int>(std::floor(gy)) + 1; ++rr) {
        for (int cc = static_cast<int>(std::floor(gx)); cc <= static_cast<int>(std::floor(gx)) + 1; ++cc) {
          if (rr < 0 || cc < 0 || rr >= m.hc || cc >= m.wc) continue;
          const double d = (p - Vec2(cc * kCellSize + 3.5, rr * kCellSize + 3.5)).norm();
          const int idx = rr * m.wc + cc;
          if (d < best_d || (d == best_d && idx < best)) {
            best_d = d;
            best = idx;
          }
        }
      }
      if (best >= 0 && best_d <= eps_cell && m.valid_target[static_cast<size_t>(best)]) m.partner[cell] = best;
    }
  }
  return m;
}

void write_label_grid_csv(const std::filesystem::path& path, const LabelGrid& grid) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << "cell_row,cell_col,label\n";
  for (int r = 0; r < grid.hc; ++r) {
    for (int c = 0; c < grid.wc; ++c) {
      const size_t cell = static_cast<size_t>(r) * grid.wc + c;
      // Unsupervised cells are stored with label -1.
      if (!grid.supervised[cell]) {
        out << r << ',' << c << ",-1\n";
      } else if (grid.labels[cell] != kDustbin) {
        out << r << ',' << c << ',' << grid.labels[cell] << '\n';
      }
    }
  }
  if (!out) throw IoError("write failed: " + path.string());
}

LabelGrid read_label_grid_csv(const std::filesystem::path& path, int hc, int wc) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open for reading: " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "cell_row,cell_col,label") {
    throw IoError("label CSV: unexpected header in " + path.string());
  }
  LabelGrid grid(hc, wc);
  std::vector<std::uint8_t> seen(static_cast<size_t>(hc) * wc, 0);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    int r = 0, c = 0, label = 0;
    char s1 = 0, s2 = 0;
    std::istringstream ss(line);
    if (!(ss >> r >> s1 >> c >> s2 >> label) || s1 != ',' || s2 != ',' || r < 0 || c < 0 || r >= hc || c >= wc ||
        label < -1 || label > kDustbin) {
      throw IoError("label CSV: bad row '" + line + "'");
    }
    const size_t cell = static_cast<size_t>(r) * wc + c;
    if (seen[cell]++) throw IoError("label CSV: duplicate cell in " + path.string());
    if (label < 0) {
      grid.supervised[cell] = 0;
    } else {
      grid.labels[cell] = label;
    }
  }
  return grid;
}

void write_verdicts_csv(const std::filesystem::path& path, const std::vector<GoodFeatureVerdict>& verdicts) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << "track_id,verdict,mean_residual,length\n" << std::setprecision(17);
  for (const auto& v : verdicts) {
    out << v.track_id << ',' << verdict_name(v.verdict) << ',';
    if (v.mean_residual) out << *v.mean_residual;
    out << ',' << v.track_length << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

std::vector<GoodFeatureVerdict> read_verdicts_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open for reading: " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "track_id,verdict,mean_residual,length") {
    throw IoError("verdicts CSV: unexpected header in " + path.string());
  }
  std::vector<GoodFeatureVerdict> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) f.push_back(field);
    if (f.size() != 4) throw IoError("verdicts CSV: expected 4 fields in '" + line + "'");
    GoodFeatureVerdict v;
    v.track_id = std::stoi(f[0]);
    if (f[1] == "good") {
      v.verdict = Verdict::good;
    } else if (f[1] == "bad") {
      v.verdict = Verdict::bad;
    } else if (f[1] == "undecided") {
      v.verdict = Verdict::undecided;
    } else {
      throw IoError("verdicts CSV: unknown verdict '" + f[1] + "'");
    }
    if (!f[2].empty()) v.mean_residual = std::stod(f[2]);
    v.track_length = std::stoi(f[3]);
    out.push_back(v);
  }
  return out;
}

}  // namespace gdf
