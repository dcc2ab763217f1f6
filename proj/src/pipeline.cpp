#include "gdf/pipeline.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace gdf {

namespace fs = std::filesystem;

namespace {

std::string fixed(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

void require_file(const fs::path& p, const std::string& hint) {
  if (!fs::exists(p)) throw StageError("missing input " + p.string() + " (" + hint + ")");
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  if (!out) throw IoError("cannot open for writing: " + p.string());
  out << text;
  if (!out) throw IoError("write failed: " + p.string());
}

StoredDataset load_dataset(const RunConfig& cfg) {
  if (cfg.dataset.empty()) throw StageError("config key 'dataset' is not set (run synth first)");
  require_file(cfg.dataset / "scene.cfg", "run synth first");
  return read_dataset(cfg.dataset);
}

std::string frame_name(int frame, const char* ext) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%06d%s", frame, ext);
  return buf;
}

// Drops keypoints of a warped image that sit on or near the warp's padding.
std::vector<Vec2> inside_support(const std::vector<Vec2>& kps, const BinaryMask& valid, int margin) {
  std::vector<Vec2> out;
  for (const Vec2& p : kps) {
    const int x = static_cast<int>(p.x()), y = static_cast<int>(p.y());
    bool ok = true;
    for (int dy = -margin; dy <= margin && ok; ++dy) {
      for (int dx = -margin; dx <= margin; ++dx) {
        const int u = x + dx, v = y + dy;
        if (u < 0 || v < 0 || u >= valid.width || v >= valid.height || !valid.at(u, v)) {
          ok = false;
          break;
        }
      }
    }
    if (ok) out.push_back(p);
  }
  return out;
}

std::vector<TimedPose> timed(const std::vector<PoseSE3>& poses) {
  std::vector<TimedPose> out;
  for (size_t i = 0; i < poses.size(); ++i) out.push_back({0.1 * static_cast<double>(i), poses[i]});
  return out;
}

}  // namespace

std::unique_ptr<FeatureExtractor> make_extractor(const std::string& weights, const RunConfig& cfg) {
  if (weights == "classical") return std::make_unique<ClassicalExtractor>(cfg.extractor);
  if (weights == "random") {
    return std::make_unique<LearnedExtractor>(
        ModelParams::init(cfg.height, cfg.width, cfg.descriptor_dim, cfg.init_seed), cfg.extractor);
  }
  if (weights.empty() || !fs::exists(weights)) throw StageError("checkpoint not found: '" + weights + "'");
  return std::make_unique<LearnedExtractor>(load_checkpoint(weights), cfg.extractor);
}

SyntheticDataset synthesize(const RunConfig& cfg, std::uint64_t scene_seed) {
  TrajectorySpec t = cfg.trajectory;
  t.frames = cfg.frames;
  return render_sequence(cfg.scene(scene_seed), make_trajectory(t), cfg.rig());
}

ArmMetrics evaluate_arm(const std::string& method, const FeatureExtractor& extractor, const SyntheticDataset& ds,
                        const StereoRig& rig, const RunConfig& cfg) {
  if (ds.size() < 2) throw std::invalid_argument("evaluate_arm: need at least two frames");
  ArmMetrics m;
  m.method = method;
  const int w = ds.left.front().width, h = ds.left.front().height;
  std::vector<std::vector<Vec2>> kps;
  for (size_t f = 0; f < ds.size(); ++f) {
    kps.push_back(positions(extractor.extract(ds.left[f])));
    const CoverageReport all = coverage(kps.back(), w, h, cfg.eval_grid, &ds.gt_region_mask[f]);
    std::vector<Vec2> fixed_part;
    for (const Vec2& p : kps.back()) {
      if (!ds.gt_region_mask[f].at(static_cast<int>(p.x()), static_cast<int>(p.y()))) fixed_part.push_back(p);
    }
    m.entropy += coverage(fixed_part, w, h, cfg.eval_grid).occupancy_entropy;
    m.dyn_fraction += all.dynamic_region_fraction;
    m.mean_keypoints += all.keypoint_count;
  }
  const auto n = static_cast<double>(ds.size());
  m.entropy /= n;
  m.dyn_fraction /= n;
  m.mean_keypoints /= n;

  HomographyConfig hcfg = cfg.homography();
  hcfg.width = w;
  hcfg.height = h;
  int pairs = 0;
  for (int i = 0; i < cfg.repeatability_pairs; ++i) {
    const size_t f = static_cast<size_t>(i) * ds.size() / static_cast<size_t>(cfg.repeatability_pairs);
    const Homography hom = sample_homography(hcfg, 0x5eed0000ULL + static_cast<std::uint64_t>(i));
    const WarpResult warped = warp_image(ds.left[f], hom);
    const std::vector<Vec2> b = inside_support(positions(extractor.extract(warped.image)), warped.valid, 4);
    const RepeatabilityResult r = symmetric_repeatability(kps[f], b, hom, cfg.repeatability_eps, w, h);
    if (!r.defined) continue;
    m.repeatability += r.value;
    ++pairs;
  }
  if (pairs > 0) m.repeatability /= pairs;

  const VOResult vo = run_vo(ds.left, ds.right, extractor, rig, cfg.vo);
  m.trajectory = trajectory_error(vo.trajectory(ds.gt_poses.front()), ds.gt_poses, vo.failure_count());
  return m;
}

std::string format_compare_table(const std::vector<ArmMetrics>& arms) {
  std::ostringstream os;
  char line[256];
  std::snprintf(line, sizeof line, "%-12s %10s %13s %14s %10s %9s\n", "method", "entropy", "dyn_fraction",
                "repeatability", "ate_rmse", "failures");
  os << line;
  for (const ArmMetrics& a : arms) {
    std::snprintf(line, sizeof line, "%-12s %10.4f %13.4f %14.4f %10.4f %9d\n", a.method.c_str(), a.entropy,
                  a.dyn_fraction, a.repeatability, a.trajectory.ate_rmse, a.trajectory.failure_count);
    os << line;
  }
  return os.str();
}

void prepare_output(const fs::path& out, bool force) {
  if (out.empty()) throw StageError("no output directory given (use --out)");
  if (fs::exists(out)) {
    if (!fs::is_directory(out)) throw StageError("output path exists and is not a directory: " + out.string());
    if (!fs::is_empty(out)) {
      if (!force) throw StageError("output directory is not empty: " + out.string() + " (use --force)");
      fs::remove_all(out);
    }
  }
  fs::create_directories(out);
}

std::string cmd_synth(const RunConfig& cfg, const fs::path& out, bool force) {
  prepare_output(out, force);
  const SyntheticDataset ds = synthesize(cfg, cfg.seed);
  write_dataset(out, ds, cfg.scene(cfg.seed), cfg.rig());
  std::size_t dynamic = 0;
  for (const auto& m : ds.gt_region_mask) dynamic += m.count();
  const double share = static_cast<double>(dynamic) / (static_cast<double>(cfg.width) * cfg.height * ds.size());
  return "synth: " + std::to_string(ds.size()) + " frames " + std::to_string(cfg.width) + "x" +
         std::to_string(cfg.height) + ", dynamic share " + fixed(share, 3) + " -> " + out.string();
}

std::string cmd_vo(const RunConfig& cfg, const fs::path& out, bool force) {
  const auto extractor = make_extractor(cfg.weights, cfg);
  const StoredDataset stored = load_dataset(cfg);
  prepare_output(out, force);
  const SyntheticDataset& ds = stored.data;
  const VOResult vo = run_vo(ds.left, ds.right, *extractor, stored.rig, cfg.vo);
  write_trajectory_csv(out / "trajectory.csv", timed(vo.trajectory(ds.gt_poses.front())));
  write_tracks_csv(out / "tracks.csv", vo.tracks);
  std::ostringstream pairs;
  pairs << "pair,failed,inliers\n";
  double inliers = 0.0;
  for (size_t t = 0; t < vo.relative_poses.size(); ++t) {
    pairs << t << ',' << static_cast<int>(vo.failed[t]) << ',' << vo.inlier_counts[t] << '\n';
    inliers += vo.inlier_counts[t];
  }
  write_text(out / "pairs.csv", pairs.str());
  std::vector<FrameKeypoints> dump;
  for (size_t f = 0; f < vo.keypoints.size(); ++f) dump.push_back({static_cast<int>(f), vo.keypoints[f]});
  write_keypoint_dump(out / "keypoints.csv", out / "descriptors.f32", dump);
  const double mean_inliers = inliers / static_cast<double>(vo.relative_poses.size());
  write_text(out / "summary.txt", "extractor=" + extractor->name() + "\nframes=" + std::to_string(ds.size()) +
                                      "\nfailures=" + std::to_string(vo.failure_count()) +
                                      "\nmean_inliers=" + fixed(mean_inliers, 3) + "\n");
  return "vo: " + extractor->name() + ", " + std::to_string(ds.size()) + " frames, " +
         std::to_string(vo.failure_count()) + " failures, mean inliers " + fixed(mean_inliers, 1);
}

std::string cmd_label(const RunConfig& cfg, const fs::path& out, bool force) {
  if (cfg.vo_dir.empty()) throw StageError("config key 'vo_dir' is not set (run vo first)");
  for (const char* f : {"tracks.csv", "trajectory.csv", "pairs.csv"}) require_file(cfg.vo_dir / f, "run vo first");
  const StoredDataset stored = load_dataset(cfg);
  prepare_output(out, force);

  VOResult vo;
  vo.tracks = read_tracks_csv(cfg.vo_dir / "tracks.csv");
  const std::vector<TimedPose> traj = read_trajectory_csv(cfg.vo_dir / "trajectory.csv");
  for (size_t t = 0; t + 1 < traj.size(); ++t) {
    vo.relative_poses.push_back(compose(inverse(traj[t + 1].pose), traj[t].pose));
  }
  std::ifstream pairs(cfg.vo_dir / "pairs.csv");
  std::string line;
  std::getline(pairs, line);
  while (std::getline(pairs, line)) {
    if (line.empty()) continue;
    int pair = 0, failed = 0, inliers = 0;
    if (std::sscanf(line.c_str(), "%d,%d,%d", &pair, &failed, &inliers) != 3) {
      throw IoError("pairs.csv: bad row '" + line + "'");
    }
    vo.failed.push_back(static_cast<std::uint8_t>(failed));
    vo.inlier_counts.push_back(inliers);
  }
  if (vo.failed.size() != vo.relative_poses.size()) throw IoError("vo output: pairs.csv and trajectory.csv disagree");

  const std::vector<GoodFeatureVerdict> verdicts = score_tracks(vo, stored.rig, cfg.supervision);
  write_verdicts_csv(out / "verdicts.csv", verdicts);
  fs::create_directories(out / "labels");
  const int w = stored.data.left.front().width, h = stored.data.left.front().height;
  int labeled = 0;
  for (int f = 0; f < static_cast<int>(traj.size()); ++f) {
    const LabelGrid grid = frame_label_grid(vo, verdicts, f, w, h);
    labeled += std::any_of(grid.labels.begin(), grid.labels.end(), [](int l) { return l != kDustbin; }) ? 1 : 0;
    write_label_grid_csv(out / "labels" / frame_name(f, ".csv"), grid);
  }
  int counts[3] = {0, 0, 0};
  for (const auto& v : verdicts) ++counts[static_cast<int>(v.verdict)];
  write_text(out / "summary.txt", "good=" + std::to_string(counts[0]) + "\nbad=" + std::to_string(counts[1]) +
                                      "\nundecided=" + std::to_string(counts[2]) +
                                      "\nlabeled_frames=" + std::to_string(labeled) + "\n");
  return "label: " + std::to_string(counts[0]) + " good, " + std::to_string(counts[1]) + " bad, " +
         std::to_string(counts[2]) + " undecided tracks; " + std::to_string(labeled) + " labeled frames";
}

std::string cmd_train(const RunConfig& cfg, const fs::path& out, bool force) {
  ModelParams params = cfg.weights == "classical" || cfg.weights == "random"
                           ? ModelParams::init(cfg.height, cfg.width, cfg.descriptor_dim, cfg.init_seed)
                           : (fs::exists(cfg.weights) ? load_checkpoint(cfg.weights)
                                                      : throw StageError("checkpoint not found: " + cfg.weights));
  const StoredDataset stored = load_dataset(cfg);
  const SyntheticDataset& ds = stored.data;
  if (params.width != ds.left.front().width || params.height != ds.left.front().height) {
    throw StageError("model size does not match the dataset image size");
  }
  std::vector<TrainSample> archived;
  if (!cfg.labels_dir.empty()) {
    require_file(cfg.labels_dir / "labels", "run label first");
    for (int f = 0; f < static_cast<int>(ds.size()); ++f) {
      const fs::path p = cfg.labels_dir / "labels" / frame_name(f, ".csv");
      require_file(p, "run label first");
      LabelGrid grid = read_label_grid_csv(p, params.height / kCellSize, params.width / kCellSize);
      if (std::any_of(grid.labels.begin(), grid.labels.end(), [](int l) { return l != kDustbin; })) {
        archived.push_back({ds.left[static_cast<size_t>(f)], std::move(grid), Homography()});
      }
    }
    if (archived.empty()) throw StageError("label archive holds no keypoint labels: " + cfg.labels_dir.string());
  }
  prepare_output(out, force);

  const RoundConfig rc = cfg.round_config();
  Optimizer opt;
  std::vector<LogRow> log;
  std::ostringstream rounds;
  rounds << "round,source,vo_failures,good_tracks,labeled_frames,mean_loss\n";
  for (int r = 0; r < cfg.rounds; ++r) {
    RoundReport rep;
    std::string source = "self";
    if (r == 0 && !archived.empty()) {
      rep = train_on_frames(archived, params, opt, rc.train, r);
      source = "archive";
    } else {
      rep = self_supervised_round(ds.left, ds.right, params, opt, stored.rig, rc, r);
    }
    for (LogRow row : rep.log) {
      row.step = static_cast<int>(log.size());
      log.push_back(row);
    }
    rounds << r << ',' << source << ',' << rep.vo_failures << ',' << rep.good_tracks << ',' << rep.labeled_frames
           << ',' << fixed(rep.mean_loss, 8) << '\n';
  }
  save_checkpoint(out / "weights.bin", params);
  write_training_log(out / "train_log.csv", log);
  write_text(out / "rounds.csv", rounds.str());
  const double last = log.empty() ? 0.0 : log.back().report.total;
  return "train: " + std::to_string(cfg.rounds) + " rounds, " + std::to_string(log.size()) + " steps, final loss " +
         fixed(last, 4) + " -> " + (out / "weights.bin").string();
}

std::string cmd_eval(const RunConfig& cfg, const fs::path& out, bool force) {
  const auto extractor = make_extractor(cfg.weights, cfg);
  const StoredDataset stored = load_dataset(cfg);
  prepare_output(out, force);
  const SyntheticDataset& ds = stored.data;
  const ArmMetrics m = evaluate_arm(extractor->name(), *extractor, ds, stored.rig, cfg);
  std::ostringstream csv;
  csv << "method,entropy,dyn_fraction,repeatability,ate_rmse,rpe_trans,rpe_rot,failures,mean_keypoints\n"
      << m.method << ',' << fixed(m.entropy) << ',' << fixed(m.dyn_fraction) << ',' << fixed(m.repeatability) << ','
      << fixed(m.trajectory.ate_rmse) << ',' << fixed(m.trajectory.rpe_trans) << ',' << fixed(m.trajectory.rpe_rot)
      << ',' << m.trajectory.failure_count << ',' << fixed(m.mean_keypoints, 2) << '\n';
  write_text(out / "metrics.csv", csv.str());

  std::ostringstream cov;
  cov << "frame,keypoints,entropy,dyn_fraction\n";
  const int w = ds.left.front().width, h = ds.left.front().height;
  for (size_t f = 0; f < ds.size(); ++f) {
    const std::vector<Vec2> kps = positions(extractor->extract(ds.left[f]));
    const CoverageReport c = coverage(kps, w, h, cfg.eval_grid, &ds.gt_region_mask[f]);
    cov << f << ',' << c.keypoint_count << ',' << fixed(c.occupancy_entropy) << ','
        << fixed(c.dynamic_region_fraction) << '\n';
    if (f == 0 || f + 1 == ds.size()) render_overlay(ds.left[f], kps, out / ("overlay_" + frame_name(static_cast<int>(f), ".pgm")));
  }
  write_text(out / "coverage.csv", cov.str());
  return "eval: " + format_compare_table({m});
}

std::string cmd_compare(const RunConfig& cfg, const fs::path& out, bool force) {
  if (cfg.checkpoint.empty()) throw StageError("config key 'checkpoint' is not set (run train first)");
  require_file(cfg.checkpoint, "run train first");
  const auto classical = make_extractor("classical", cfg);
  const auto untrained = make_extractor("random", cfg);
  const auto tuned = make_extractor(cfg.checkpoint.string(), cfg);
  prepare_output(out, force);
  const SyntheticDataset held_out = synthesize(cfg, cfg.holdout_seed);
  const StereoRig rig = cfg.rig();
  std::vector<ArmMetrics> arms;
  arms.push_back(evaluate_arm("classical", *classical, held_out, rig, cfg));
  arms.push_back(evaluate_arm("untrained", *untrained, held_out, rig, cfg));
  arms.push_back(evaluate_arm("fine-tuned", *tuned, held_out, rig, cfg));
  const std::string table = format_compare_table(arms);
  write_text(out / "compare.txt", table);
  return table;
}

}  // namespace gdf
