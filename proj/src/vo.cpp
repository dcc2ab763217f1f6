#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include "gdf/matcher_vo.hpp"

namespace gdf {

std::vector<PoseSE3> VOResult::trajectory(const PoseSE3& origin) const {
  std::vector<PoseSE3> poses{origin};
  for (const PoseSE3& rel : relative_poses) poses.push_back(compose(poses.back(), inverse(rel)));
  return poses;
}

int VOResult::failure_count() const {
  return static_cast<int>(std::count_if(failed.begin(), failed.end(), [](std::uint8_t f) { return f != 0; }));
}

namespace {

struct FrameState {
  std::vector<Keypoint> keypoints;
  std::vector<std::optional<Vec2>> right;
  std::vector<std::optional<double>> depth;
  std::vector<int> track_of;  // keypoint -> index into result.tracks
};

FrameState process_frame(const GrayImage& left, const GrayImage& right, const FeatureExtractor& extractor,
                         const StereoRig& rig, const VoConfig& cfg) {
  FrameState fs;
  fs.keypoints = extractor.extract(left);
  const std::vector<Keypoint> right_kps = extractor.extract(right);
  fs.right.assign(fs.keypoints.size(), std::nullopt);
  fs.depth.assign(fs.keypoints.size(), std::nullopt);
  fs.track_of.assign(fs.keypoints.size(), -1);
  for (const StereoMatch& sm : stereo_match(fs.keypoints, right_kps, rig, cfg.stereo, &left, &right)) {
    fs.right[static_cast<size_t>(sm.match.idx_a)] = sm.right;
    fs.depth[static_cast<size_t>(sm.match.idx_a)] = sm.depth;
  }
  return fs;
}

TrackObservation observation(const FrameState& fs, int frame, int k) {
  const auto& kp = fs.keypoints[static_cast<size_t>(k)];
  return {frame, k, Vec2(kp.x, kp.y), fs.right[static_cast<size_t>(k)], fs.depth[static_cast<size_t>(k)]};
}

}  // namespace

VOResult run_vo(const std::vector<GrayImage>& left, const std::vector<GrayImage>& right,
                const FeatureExtractor& extractor, const StereoRig& rig, const VoConfig& cfg) {
  if (left.size() < 2 || left.size() != right.size()) {
    throw std::invalid_argument("run_vo: need at least two stereo frames");
  }
  VOResult result;
  FrameState prev = process_frame(left[0], right[0], extractor, rig, cfg);
  for (int k = 0; k < static_cast<int>(prev.keypoints.size()); ++k) {
    prev.track_of[static_cast<size_t>(k)] = static_cast<int>(result.tracks.size());
    result.tracks.push_back({static_cast<int>(result.tracks.size()), {observation(prev, 0, k)}, {}});
  }
  result.keypoints.push_back(prev.keypoints);

  for (size_t t = 1; t < left.size(); ++t) {
    FrameState cur = process_frame(left[t], right[t], extractor, rig, cfg);
    const double window2 = cfg.temporal_window * cfg.temporal_window;
    const CandidateGate gate = [&](int i, int j) {
      const auto& a = prev.keypoints[static_cast<size_t>(i)];
      const auto& b = cur.keypoints[static_cast<size_t>(j)];
      const double dx = a.x - b.x, dy = a.y - b.y;
      return dx * dx + dy * dy <= window2;
    };
    const std::vector<Match> matches =
        match_descriptors(prev.keypoints, cur.keypoints, cfg.temporal_ratio, cfg.temporal_mutual, gate);

    std::vector<Correspondence3d2d> corr;
    for (const Match& m : matches) {
      const auto& depth = prev.depth[static_cast<size_t>(m.idx_a)];
      if (!depth) continue;
      const auto& a = prev.keypoints[static_cast<size_t>(m.idx_a)];
      const auto& b = cur.keypoints[static_cast<size_t>(m.idx_b)];
      corr.push_back({unproject(rig.left, Vec2(a.x, a.y), *depth), Vec2(b.x, b.y)});
    }
    RansacConfig rcfg = cfg.ransac;
    rcfg.seed = cfg.ransac.seed + t;
    const PoseEstimate est = estimate_relative_pose(corr, rig.left, rcfg);
    if (est.status == PoseStatus::ok) {
      result.relative_poses.push_back(est.pose);
      result.failed.push_back(0);
    } else {
      result.relative_poses.push_back(PoseSE3::identity());
      result.failed.push_back(1);
    }
    result.inlier_counts.push_back(est.inlier_count);

    for (const Match& m : matches) {
      const int track = prev.track_of[static_cast<size_t>(m.idx_a)];
      cur.track_of[static_cast<size_t>(m.idx_b)] = track;
      result.tracks[static_cast<size_t>(track)].observations.push_back(
          observation(cur, static_cast<int>(t), m.idx_b));
    }
    for (int k = 0; k < static_cast<int>(cur.keypoints.size()); ++k) {
      if (cur.track_of[static_cast<size_t>(k)] >= 0) continue;
      cur.track_of[static_cast<size_t>(k)] = static_cast<int>(result.tracks.size());
      result.tracks.push_back({static_cast<int>(result.tracks.size()), {observation(cur, static_cast<int>(t), k)}, {}});
    }
    result.keypoints.push_back(cur.keypoints);
    prev = std::move(cur);
  }
  return result;
}

void write_tracks_csv(const std::filesystem::path& path, const std::vector<Track>& tracks) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << "track_id,frame,x,y,right_x,depth\n" << std::setprecision(17);
  for (const Track& t : tracks) {
    for (const auto& o : t.observations) {
      out << t.id << ',' << o.frame << ',' << o.left.x() << ',' << o.left.y() << ',';
      if (o.right) out << o.right->x();
      out << ',';
      if (o.depth) out << *o.depth;
      out << '\n';
    }
  }
  if (!out) throw IoError("write failed: " + path.string());
}

std::vector<Track> read_tracks_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open for reading: " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "track_id,frame,x,y,right_x,depth") {
    throw IoError("tracks CSV: unexpected header in " + path.string());
  }
  std::vector<Track> tracks;
  std::map<int, size_t> index;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) f.push_back(field);
    if (!line.empty() && line.back() == ',') f.emplace_back();
    if (f.size() != 6) throw IoError("tracks CSV: expected 6 fields in '" + line + "'");
    const int id = std::stoi(f[0]);
    TrackObservation o;
    o.frame = std::stoi(f[1]);
    o.keypoint = -1;
    o.left = Vec2(std::stod(f[2]), std::stod(f[3]));
    // Rectified pairs share the row; only the column is stored.
    if (!f[4].empty()) o.right = Vec2(std::stod(f[4]), o.left.y());
    if (!f[5].empty()) o.depth = std::stod(f[5]);
    auto it = index.find(id);
    if (it == index.end()) {
      it = index.emplace(id, tracks.size()).first;
      tracks.push_back({id, {}, {}});
    }
    tracks[it->second].observations.push_back(o);
  }
  return tracks;
}

}  // namespace gdf
