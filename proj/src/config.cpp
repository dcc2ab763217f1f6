#include "gdf/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

namespace gdf {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  const char* end = v.data() + v.size();
  const auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end) throw ConfigError("config: bad value for '" + key + "': '" + v + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("config: bad value for '" + key + "': '" + v + "' (expected true/false)");
}

template <typename T>
std::string format_number(T v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

struct Field {
  std::string key;
  std::function<void(RunConfig&, const std::string&, const std::filesystem::path&)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename T, typename Access>
Field number(std::string key, Access access) {
  return {key,
          [key, access](RunConfig& c, const std::string& v, const std::filesystem::path&) {
            access(c) = parse_number<T>(key, v);
          },
          [access](const RunConfig& c) { return format_number(access(const_cast<RunConfig&>(c))); }};
}

template <typename Access>
Field flag(std::string key, Access access) {
  return {key, [key, access](RunConfig& c, const std::string& v, const std::filesystem::path&) {
            access(c) = parse_bool(key, v);
          },
          [access](const RunConfig& c) { return std::string(access(const_cast<RunConfig&>(c)) ? "true" : "false"); }};
}

template <typename Access>
Field path(std::string key, Access access) {
  return {key,
          [access](RunConfig& c, const std::string& v, const std::filesystem::path& base) {
            const std::filesystem::path p(v);
            access(c) = v.empty() || p.is_absolute() || base.empty() ? p : base / p;
          },
          [access](const RunConfig& c) { return access(const_cast<RunConfig&>(c)).string(); }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    std::vector<Field> f;
    f.push_back(number<std::uint64_t>("seed", [](RunConfig& c) -> auto& { return c.seed; }));
    f.push_back(number<int>("frames", [](RunConfig& c) -> auto& { return c.frames; }));
    f.push_back(number<int>("width", [](RunConfig& c) -> auto& { return c.width; }));
    f.push_back(number<int>("height", [](RunConfig& c) -> auto& { return c.height; }));
    f.push_back(number<double>("focal", [](RunConfig& c) -> auto& { return c.focal; }));
    f.push_back(number<double>("baseline", [](RunConfig& c) -> auto& { return c.baseline; }));
    f.push_back(number<int>("landmark_count", [](RunConfig& c) -> auto& { return c.landmark_count; }));
    f.push_back(number<double>("brightness", [](RunConfig& c) -> auto& { return c.brightness; }));
    f.push_back(number<double>("trajectory.step", [](RunConfig& c) -> auto& { return c.trajectory.step; }));
    f.push_back(number<double>("trajectory.yaw_amplitude_deg",
                               [](RunConfig& c) -> auto& { return c.trajectory.yaw_amplitude_deg; }));
    f.push_back(number<double>("trajectory.lateral_amplitude",
                               [](RunConfig& c) -> auto& { return c.trajectory.lateral_amplitude; }));

    f.push_back(path("dataset", [](RunConfig& c) -> auto& { return c.dataset; }));
    f.push_back({"weights",
                 [](RunConfig& c, const std::string& v, const std::filesystem::path& base) {
                   const std::filesystem::path p(v);
                   c.weights = v == "classical" || v == "random" || p.is_absolute() || base.empty()
                                   ? v
                                   : (base / p).string();
                 },
                 [](const RunConfig& c) { return c.weights; }});
    f.push_back(path("vo_dir", [](RunConfig& c) -> auto& { return c.vo_dir; }));
    f.push_back(path("labels_dir", [](RunConfig& c) -> auto& { return c.labels_dir; }));
    f.push_back(path("checkpoint", [](RunConfig& c) -> auto& { return c.checkpoint; }));

    f.push_back(number<int>("extractor.nms_radius", [](RunConfig& c) -> auto& { return c.extractor.nms_radius; }));
    f.push_back(number<double>("extractor.threshold", [](RunConfig& c) -> auto& { return c.extractor.threshold; }));
    f.push_back(
        number<int>("extractor.max_keypoints", [](RunConfig& c) -> auto& { return c.extractor.max_keypoints; }));
    f.push_back(number<int>("extractor.border", [](RunConfig& c) -> auto& { return c.extractor.border; }));
    f.push_back(
        number<int>("extractor.corner_window", [](RunConfig& c) -> auto& { return c.extractor.corner_window; }));

    f.push_back(number<double>("stereo.band", [](RunConfig& c) -> auto& { return c.vo.stereo.band; }));
    f.push_back(
        number<double>("stereo.min_disparity", [](RunConfig& c) -> auto& { return c.vo.stereo.min_disparity; }));
    f.push_back(
        number<double>("stereo.max_disparity", [](RunConfig& c) -> auto& { return c.vo.stereo.max_disparity; }));
    f.push_back(number<double>("stereo.ratio", [](RunConfig& c) -> auto& { return c.vo.stereo.ratio; }));
    f.push_back(flag("stereo.mutual", [](RunConfig& c) -> auto& { return c.vo.stereo.mutual; }));
    f.push_back(number<int>("stereo.refine_half", [](RunConfig& c) -> auto& { return c.vo.stereo.refine_half; }));
    f.push_back(
        number<int>("stereo.refine_search", [](RunConfig& c) -> auto& { return c.vo.stereo.refine_search; }));
    f.push_back(number<double>("vo.temporal_ratio", [](RunConfig& c) -> auto& { return c.vo.temporal_ratio; }));
    f.push_back(flag("vo.temporal_mutual", [](RunConfig& c) -> auto& { return c.vo.temporal_mutual; }));
    f.push_back(number<double>("vo.temporal_window", [](RunConfig& c) -> auto& { return c.vo.temporal_window; }));
    f.push_back(number<int>("ransac.iterations", [](RunConfig& c) -> auto& { return c.vo.ransac.iterations; }));
    f.push_back(number<double>("ransac.inlier_px", [](RunConfig& c) -> auto& { return c.vo.ransac.inlier_px; }));
    f.push_back(number<int>("ransac.min_inliers", [](RunConfig& c) -> auto& { return c.vo.ransac.min_inliers; }));
    f.push_back(number<std::uint64_t>("ransac.seed", [](RunConfig& c) -> auto& { return c.vo.ransac.seed; }));
    f.push_back(number<int>("ransac.max_refine_iterations",
                            [](RunConfig& c) -> auto& { return c.vo.ransac.max_refine_iterations; }));

    f.push_back(number<double>("supervision.tau_px", [](RunConfig& c) -> auto& { return c.supervision.tau_px; }));
    f.push_back(
        number<int>("supervision.min_length", [](RunConfig& c) -> auto& { return c.supervision.min_length; }));
    f.push_back(
        number<double>("supervision.stereo_tau", [](RunConfig& c) -> auto& { return c.supervision.stereo_tau; }));
    f.push_back(
        number<double>("supervision.eps_cell", [](RunConfig& c) -> auto& { return c.supervision.eps_cell; }));

    f.push_back(number<double>("train.step_size", [](RunConfig& c) -> auto& { return c.train.step_size; }));
    f.push_back(number<double>("train.momentum", [](RunConfig& c) -> auto& { return c.train.momentum; }));
    f.push_back(number<int>("train.steps", [](RunConfig& c) -> auto& { return c.train.steps; }));
    f.push_back(number<int>("train.batch_size", [](RunConfig& c) -> auto& { return c.train.batch_size; }));
    f.push_back(number<std::uint64_t>("train.seed", [](RunConfig& c) -> auto& { return c.train.seed; }));
    f.push_back(number<double>("train.m_p", [](RunConfig& c) -> auto& { return c.train.hinge.m_p; }));
    f.push_back(number<double>("train.m_n", [](RunConfig& c) -> auto& { return c.train.hinge.m_n; }));
    f.push_back(number<double>("train.lambda_d", [](RunConfig& c) -> auto& { return c.train.hinge.lambda_d; }));
    f.push_back(number<double>("train.w_i", [](RunConfig& c) -> auto& { return c.train.weights.w_i; }));
    f.push_back(
        number<double>("train.w_i_warped", [](RunConfig& c) -> auto& { return c.train.weights.w_i_warped; }));
    f.push_back(number<double>("train.w_pk", [](RunConfig& c) -> auto& { return c.train.weights.w_pk; }));
    f.push_back(number<double>("train.w_d", [](RunConfig& c) -> auto& { return c.train.weights.w_d; }));
    f.push_back(number<int>("train.rounds", [](RunConfig& c) -> auto& { return c.rounds; }));
    f.push_back(number<int>("train.descriptor_dim", [](RunConfig& c) -> auto& { return c.descriptor_dim; }));
    f.push_back(number<std::uint64_t>("train.init_seed", [](RunConfig& c) -> auto& { return c.init_seed; }));
    f.push_back(number<double>("homography.scale_amplitude",
                               [](RunConfig& c) -> auto& { return c.train.homography.scale_amplitude; }));
    f.push_back(number<double>("homography.rotation_deg",
                               [](RunConfig& c) -> auto& { return c.train.homography.rotation_deg; }));
    f.push_back(number<double>("homography.translation_fraction",
                               [](RunConfig& c) -> auto& { return c.train.homography.translation_fraction; }));
    f.push_back(number<double>("homography.perspective_fraction",
                               [](RunConfig& c) -> auto& { return c.train.homography.perspective_fraction; }));

    f.push_back(number<int>("eval.grid", [](RunConfig& c) -> auto& { return c.eval_grid; }));
    f.push_back(
        number<double>("eval.repeatability_eps", [](RunConfig& c) -> auto& { return c.repeatability_eps; }));
    f.push_back(
        number<int>("eval.repeatability_pairs", [](RunConfig& c) -> auto& { return c.repeatability_pairs; }));
    f.push_back(number<std::uint64_t>("eval.holdout_seed", [](RunConfig& c) -> auto& { return c.holdout_seed; }));
    return f;
  }();
  return table;
}

}  // namespace

CameraIntrinsics RunConfig::intrinsics() const {
  CameraIntrinsics k;
  k.fx = k.fy = focal;
  k.cx = width / 2.0;
  k.cy = height / 2.0;
  k.width = width;
  k.height = height;
  return k;
}

StereoRig RunConfig::rig() const { return StereoRig::rectified(intrinsics(), baseline); }

SceneSpec RunConfig::scene(std::uint64_t scene_seed) const {
  SceneSpec s = SceneSpec::canal(scene_seed, width, height);
  s.landmark_count = landmark_count;
  s.brightness = brightness;
  return s;
}

HomographyConfig RunConfig::homography() const {
  HomographyConfig h = train.homography;
  h.width = width;
  h.height = height;
  return h;
}

RoundConfig RunConfig::round_config() const {
  RoundConfig r;
  r.vo = vo;
  r.supervision = supervision;
  r.extractor = extractor;
  r.train = train;
  r.train.homography = homography();
  r.train.eps_cell = supervision.eps_cell;
  return r;
}

void RunConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError("config: " + what);
  };
  require(frames >= 2, "frames must be >= 2");
  require(width > 0 && height > 0 && width % 8 == 0 && height % 8 == 0, "width and height must be multiples of 8");
  require(focal > 0 && baseline > 0, "focal and baseline must be positive");
  require(landmark_count >= 0, "landmark_count must be >= 0");
  require(brightness > 0, "brightness must be positive");
  require(extractor.nms_radius >= 1 && extractor.max_keypoints >= 1 && extractor.border >= 0,
          "extractor settings out of range");
  require(extractor.corner_window >= 3 && extractor.corner_window % 2 == 1, "extractor.corner_window must be odd >= 3");
  require(vo.stereo.band >= 0 && vo.stereo.min_disparity >= 0 && vo.stereo.max_disparity > vo.stereo.min_disparity,
          "stereo gates out of range");
  require(vo.stereo.ratio > 0 && vo.stereo.ratio <= 1 && vo.temporal_ratio > 0 && vo.temporal_ratio <= 1,
          "ratios must be in (0, 1]");
  require(vo.temporal_window > 0, "vo.temporal_window must be positive");
  require(vo.ransac.iterations >= 1 && vo.ransac.inlier_px > 0 && vo.ransac.min_inliers >= 4,
          "ransac settings out of range");
  require(rounds >= 1 && descriptor_dim >= 1, "train.rounds and train.descriptor_dim must be >= 1");
  require(eval_grid >= 2 && repeatability_eps > 0 && repeatability_pairs >= 1, "eval settings out of range");
  try {
    supervision.validate();
    train.validate();
    homography().validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

RunConfig parse_run_config(const std::string& text, const std::filesystem::path& base_dir) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config: line " + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto& table = fields();
    const auto it = std::find_if(table.begin(), table.end(), [&](const Field& f) { return f.key == key; });
    if (it == table.end()) throw ConfigError("config: unknown key '" + key + "'");
    it->set(cfg, value, base_dir);
  }
  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str(), path.parent_path());
}

std::string format_run_config(const RunConfig& cfg) {
  std::string out;
  for (const Field& f : fields()) out += f.key + " = " + f.get(cfg) + "\n";
  return out;
}

std::vector<std::string> run_config_keys() {
  std::vector<std::string> keys;
  for (const Field& f : fields()) keys.push_back(f.key);
  return keys;
}

}  // namespace gdf
