#include "gdf/synthscene.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <random>
#include <sstream>

namespace gdf {

namespace {

constexpr double kPi = 3.14159265358979323846;

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t hash_key(std::uint64_t seed, std::int64_t a, std::int64_t b, std::int64_t c,
                       std::int64_t d = 0) {
  std::uint64_t h = splitmix(seed);
  h = splitmix(h ^ static_cast<std::uint64_t>(a));
  h = splitmix(h ^ static_cast<std::uint64_t>(b));
  h = splitmix(h ^ static_cast<std::uint64_t>(c));
  return splitmix(h ^ static_cast<std::uint64_t>(d));
}

double unit_hash(std::uint64_t h) { return static_cast<double>(h >> 11) * 0x1.0p-53; }

double smooth(double t) { return t * t * (3.0 - 2.0 * t); }

// Lattice value noise in [-1, 1], C1-continuous.
double value_noise(std::uint64_t seed, int channel, double x, double y) {
  const double fx = std::floor(x), fy = std::floor(y);
  const auto ix = static_cast<std::int64_t>(fx), iy = static_cast<std::int64_t>(fy);
  const double tx = smooth(x - fx), ty = smooth(y - fy);
  auto corner = [&](std::int64_t cx, std::int64_t cy) {
    return 2.0 * unit_hash(hash_key(seed, channel, cx, cy, 17)) - 1.0;
  };
  const double top = (1 - tx) * corner(ix, iy) + tx * corner(ix + 1, iy);
  const double bottom = (1 - tx) * corner(ix, iy + 1) + tx * corner(ix + 1, iy + 1);
  return (1 - ty) * top + ty * bottom;
}

struct Blob {
  double a = 0.0;
  double b = 0.0;
  double amplitude = 0.0;
};

// Precomputed per-plane quantities plus landmark blobs bucketed on a grid.
struct PlaneTexture {
  TexturedPlane plane;
  Vec3 normal;
  Vec3 dir_u, dir_v;
  double len_u = 0.0, len_v = 0.0;
  double bucket = 1.0;
  int nbu = 1, nbv = 1;
  std::vector<std::vector<Blob>> buckets;

  explicit PlaneTexture(const TexturedPlane& p) : plane(p) {
    normal = p.normal();
    len_u = p.edge_u.norm();
    len_v = p.edge_v.norm();
    dir_u = p.edge_u / len_u;
    dir_v = p.edge_v / len_v;
    bucket = 4.0 * p.feature_scale;
    nbu = std::max(1, static_cast<int>(std::ceil(len_u / bucket)));
    nbv = std::max(1, static_cast<int>(std::ceil(len_v / bucket)));
    buckets.resize(static_cast<size_t>(nbu) * nbv);
  }

  void add_blob(const Blob& blob) {
    const int bu = std::clamp(static_cast<int>(blob.a / bucket), 0, nbu - 1);
    const int bv = std::clamp(static_cast<int>(blob.b / bucket), 0, nbv - 1);
    buckets[static_cast<size_t>(bv) * nbu + bu].push_back(blob);
  }

  double blob_sum(double a, double b) const {
    const double inv = 1.0 / (2.0 * plane.feature_scale * plane.feature_scale);
    const int bu = static_cast<int>(std::floor(a / bucket));
    const int bv = static_cast<int>(std::floor(b / bucket));
    double sum = 0.0;
    for (int v = std::max(0, bv - 1); v <= std::min(nbv - 1, bv + 1); ++v) {
      for (int u = std::max(0, bu - 1); u <= std::min(nbu - 1, bu + 1); ++u) {
        for (const Blob& blob : buckets[static_cast<size_t>(v) * nbu + u]) {
          const double da = a - blob.a, db = b - blob.b;
          sum += blob.amplitude * std::exp(-(da * da + db * db) * inv);
        }
      }
    }
    return sum;
  }

  // Ray parameter of the hit (camera z-depth when dir has unit z in camera frame).
  std::optional<std::pair<double, Vec2>> intersect(const Vec3& origin, const Vec3& dir) const {
    const double denom = normal.dot(dir);
    if (std::abs(denom) < 1e-12) return std::nullopt;
    const double lambda = normal.dot(plane.origin - origin) / denom;
    if (!(lambda > 1e-9)) return std::nullopt;
    const Vec3 rel = origin + lambda * dir - plane.origin;
    const double a = rel.dot(dir_u), b = rel.dot(dir_v);
    if (a < 0.0 || a > len_u || b < 0.0 || b > len_v) return std::nullopt;
    return std::make_pair(lambda, Vec2(a, b));
  }
};

class SceneTexture {
 public:
  explicit SceneTexture(const SceneSpec& spec) : spec_(spec), dynamic_(spec.dynamic_region) {
    for (const auto& p : spec.static_planes) planes_.emplace_back(p);
    place_landmarks();
  }

  const std::vector<PlaneTexture>& planes() const { return planes_; }
  const PlaneTexture& dynamic() const { return dynamic_; }

  double static_intensity(int id, double a, double b) const {
    const PlaneTexture& pt = planes_[static_cast<size_t>(id)];
    const double s = pt.plane.feature_scale;
    double v = 0.5;
    v += 0.12 * value_noise(spec_.seed, 2 * id, a / (8.0 * s), b / (8.0 * s));
    v += 0.08 * value_noise(spec_.seed, 2 * id + 1, a / (3.0 * s), b / (3.0 * s));
    v += pt.blob_sum(a, b);
    return v;
  }

  // Ripples plus horizontal glints, all redrawn every frame.
  double dynamic_intensity(size_t frame, double a, double b) const {
    const double s = dynamic_.plane.feature_scale;
    const auto f = static_cast<std::int64_t>(frame);
    double v = 0.45;
    for (int k = 0; k < 3; ++k) {
      const double angle = (unit_hash(hash_key(spec_.seed, 901, f, k, 1)) - 0.5) * (kPi / 3.0);
      const double wavelength = s * (2.5 + 3.5 * unit_hash(hash_key(spec_.seed, 901, f, k, 2)));
      const double phase = 2.0 * kPi * unit_hash(hash_key(spec_.seed, 901, f, k, 3));
      const double proj = std::sin(angle) * a + std::cos(angle) * b;
      v += 0.08 * std::sin(2.0 * kPi * proj / wavelength + phase);
    }
    const double cell = 8.0 * s;
    const auto ca = static_cast<std::int64_t>(std::floor(a / cell));
    const auto cb = static_cast<std::int64_t>(std::floor(b / cell));
    const double su = 2.5 * s, sv = 0.6 * s;
    for (std::int64_t j = cb - 1; j <= cb + 1; ++j) {
      for (std::int64_t i = ca - 1; i <= ca + 1; ++i) {
        const std::uint64_t h = hash_key(spec_.seed ^ 0x5eedULL, f, i, j);
        if (unit_hash(h) > 0.6) continue;
        const double ga = (i + unit_hash(splitmix(h ^ 1))) * cell;
        const double gb = (j + unit_hash(splitmix(h ^ 2))) * cell;
        const double amp = 0.3 + 0.15 * unit_hash(splitmix(h ^ 3));
        const double da = (a - ga) / su, db = (b - gb) / sv;
        v += amp * std::exp(-0.5 * (da * da + db * db));
      }
    }
    return v;
  }

 private:
  void place_landmarks() {
    std::vector<double> weight;
    double total = 0.0;
    for (const auto& pt : planes_) {
      const double s = pt.plane.feature_scale;
      weight.push_back(pt.len_u * pt.len_v * pt.plane.richness / (s * s));
      total += weight.back();
    }
    std::mt19937_64 rng(splitmix(spec_.seed ^ 0x1a2bULL));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (size_t i = 0; i < planes_.size(); ++i) {
      if (total <= 0.0) break;
      const auto n = static_cast<int>(std::lround(spec_.landmark_count * weight[i] / total));
      for (int k = 0; k < n; ++k) {
        Blob blob;
        blob.a = unit(rng) * planes_[i].len_u;
        blob.b = unit(rng) * planes_[i].len_v;
        const double magnitude = 0.25 + 0.15 * unit(rng);
        blob.amplitude = unit(rng) < 0.5 ? -magnitude : magnitude;
        planes_[i].add_blob(blob);
      }
    }
  }

  const SceneSpec& spec_;
  std::vector<PlaneTexture> planes_;
  PlaneTexture dynamic_;
};

struct RenderedView {
  GrayImage image;
  DepthImage depth;
  BinaryMask mask;
  std::vector<std::int16_t> surface;
};

RenderedView render_view(const SceneTexture& tex, const SceneSpec& spec, const CameraIntrinsics& intr,
                         const PoseSE3& cam_to_world, size_t frame) {
  RenderedView view;
  view.image = GrayImage(intr.width, intr.height);
  view.depth = DepthImage{intr.width, intr.height, std::vector<double>(static_cast<size_t>(intr.width) * intr.height, 0.0)};
  view.mask = BinaryMask(intr.width, intr.height);
  view.surface.assign(static_cast<size_t>(intr.width) * intr.height, -1);
  const Vec3 origin = cam_to_world.translation();
  const Mat3& rot = cam_to_world.rotation();
  const auto dynamic_id = static_cast<std::int16_t>(tex.planes().size());
  for (int y = 0; y < intr.height; ++y) {
    for (int x = 0; x < intr.width; ++x) {
      const Vec3 dir = rot * Vec3((x - intr.cx) / intr.fx, (y - intr.cy) / intr.fy, 1.0);
      double best = std::numeric_limits<double>::infinity();
      int best_id = -1;
      Vec2 best_ab = Vec2::Zero();
      for (size_t i = 0; i <= tex.planes().size(); ++i) {
        const PlaneTexture& pt = i < tex.planes().size() ? tex.planes()[i] : tex.dynamic();
        if (auto hit = pt.intersect(origin, dir); hit && hit->first < best) {
          best = hit->first;
          best_id = static_cast<int>(i);
          best_ab = hit->second;
        }
      }
      const size_t idx = static_cast<size_t>(y) * intr.width + x;
      double intensity = 0.5;
      if (best_id >= 0) {
        view.depth.meters[idx] = best;
        view.surface[idx] = static_cast<std::int16_t>(best_id);
        if (best_id == dynamic_id) {
          view.mask.bits[idx] = 1;
          intensity = tex.dynamic_intensity(frame, best_ab.x(), best_ab.y());
        } else {
          intensity = tex.static_intensity(best_id, best_ab.x(), best_ab.y());
        }
      }
      view.image.pixels[idx] = static_cast<float>(std::clamp(intensity * spec.brightness, 0.0, 1.0));
    }
  }
  quantize_8bit(view.image);
  return view;
}

struct Box {
  Vec3 lo, hi;
};

Box bounds(const TexturedPlane& p) {
  Box b{p.origin, p.origin};
  for (const Vec3& c : {Vec3(p.origin + p.edge_u), Vec3(p.origin + p.edge_v),
                        Vec3(p.origin + p.edge_u + p.edge_v)}) {
    b.lo = b.lo.cwiseMin(c);
    b.hi = b.hi.cwiseMax(c);
  }
  return b;
}

bool boxes_overlap(const Box& a, const Box& b) {
  for (int k = 0; k < 3; ++k) {
    if (a.hi[k] < b.lo[k] - 1e-9 || b.hi[k] < a.lo[k] - 1e-9) return false;
  }
  return true;
}

TexturedPlane plane_from(const Vec3& origin, const Vec3& u, const Vec3& v, double richness,
                         double scale) {
  TexturedPlane p;
  p.origin = origin;
  p.edge_u = u;
  p.edge_v = v;
  p.richness = richness;
  p.feature_scale = scale;
  return p;
}

}  // namespace

SceneSpec SceneSpec::canal(std::uint64_t seed, int width, int height) {
  std::mt19937_64 rng(splitmix(seed ^ 0xca7a1ULL));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double half_width = 2.3 + 0.5 * unit(rng);
  const double wall_height = 3.5 + 1.5 * unit(rng);
  const double far_z = 28.0 + 6.0 * unit(rng);
  const double rich = 0.6 + 0.4 * unit(rng);
  const double poor = 0.15 + 0.25 * unit(rng);
  const double water_y = 1.5;
  const double wall_bottom = 1.49;

  SceneSpec spec;
  spec.seed = seed;
  spec.width = width;
  spec.height = height;
  const double length = far_z + 2.0;
  const bool rich_left = unit(rng) < 0.5;
  spec.static_planes.push_back(plane_from(Vec3(-half_width, -wall_height, -2.0), Vec3(0, 0, length),
                                          Vec3(0, wall_height + wall_bottom, 0),
                                          rich_left ? rich : poor, 0.06));
  spec.static_planes.push_back(plane_from(Vec3(half_width, -wall_height, -2.0), Vec3(0, 0, length),
                                          Vec3(0, wall_height + wall_bottom, 0),
                                          rich_left ? poor : rich, 0.06));
  spec.static_planes.push_back(plane_from(Vec3(-20.0, -16.0, far_z), Vec3(40.0, 0, 0),
                                          Vec3(0, 16.0 + wall_bottom, 0), 0.7, 0.3));
  spec.dynamic_region = plane_from(Vec3(-half_width - 0.2, water_y, -2.0),
                                   Vec3(2.0 * half_width + 0.4, 0, 0), Vec3(0, 0, length - 0.01),
                                   1.0, 0.06);
  return spec;
}

void SceneSpec::validate() const {
  if (landmark_count <= 0) throw std::invalid_argument("scene: landmark_count must be positive");
  if (width <= 0 || height <= 0 || width % 8 != 0 || height % 8 != 0) {
    throw std::invalid_argument("scene: image size must be positive multiples of 8");
  }
  if (!(brightness > 0.0)) throw std::invalid_argument("scene: brightness must be positive");
  auto check_plane = [](const TexturedPlane& p) {
    if (p.edge_u.norm() <= 0.0 || p.edge_v.norm() <= 0.0 ||
        std::abs(p.edge_u.normalized().dot(p.edge_v.normalized())) > 1e-9) {
      throw std::invalid_argument("scene: plane edges must be non-zero and orthogonal");
    }
    if (p.richness < 0.0 || p.richness > 1.0 || !(p.feature_scale > 0.0)) {
      throw std::invalid_argument("scene: plane richness or feature scale out of range");
    }
  };
  for (const auto& p : static_planes) check_plane(p);
  check_plane(dynamic_region);
  const Box dyn = bounds(dynamic_region);
  for (const auto& p : static_planes) {
    if (boxes_overlap(bounds(p), dyn)) {
      throw std::invalid_argument("scene: dynamic region must be disjoint from static planes");
    }
  }
}

std::vector<PoseSE3> make_trajectory(const TrajectorySpec& spec) {
  std::vector<PoseSE3> poses;
  poses.reserve(static_cast<size_t>(std::max(spec.frames, 0)));
  for (int i = 0; i < spec.frames; ++i) {
    const double phase = 2.0 * kPi * i / 40.0;
    const double yaw = spec.yaw_amplitude_deg * kPi / 180.0 * std::sin(phase);
    const double lateral = spec.lateral_amplitude * (1.0 - std::cos(phase));
    poses.push_back(PoseSE3::from_rotation_vector(Vec3(0.0, yaw, 0.0), Vec3(lateral, 0.0, spec.step * i)));
  }
  return poses;
}

SyntheticDataset render_sequence(const SceneSpec& spec, const std::vector<PoseSE3>& trajectory,
                                 const StereoRig& rig) {
  spec.validate();
  rig.validate();
  if (trajectory.empty()) throw std::invalid_argument("render_sequence: empty trajectory");
  if (rig.left.width != spec.width || rig.left.height != spec.height) {
    throw std::invalid_argument("render_sequence: rig image size differs from scene image size");
  }
  std::vector<TexturedPlane> all = spec.static_planes;
  all.push_back(spec.dynamic_region);
  for (size_t f = 0; f < trajectory.size(); ++f) {
    for (const Vec3& center : {trajectory[f].translation(),
                               transform(trajectory[f], Vec3(rig.baseline, 0.0, 0.0))}) {
      for (const auto& p : all) {
        const PlaneTexture pt(p);
        const Vec3 rel = center - p.origin;
        const double a = rel.dot(pt.dir_u), b = rel.dot(pt.dir_v);
        if (std::abs(rel.dot(pt.normal)) < 1e-3 && a >= 0 && a <= pt.len_u && b >= 0 && b <= pt.len_v) {
          throw SceneConstructionError("render_sequence: camera of frame " + std::to_string(f) +
                                       " lies inside a scene plane");
        }
      }
    }
  }

  const SceneTexture tex(spec);
  SyntheticDataset ds;
  const PoseSE3 right_to_left = inverse(rig.extrinsic);
  for (size_t f = 0; f < trajectory.size(); ++f) {
    RenderedView l = render_view(tex, spec, rig.left, trajectory[f], f);
    RenderedView r = render_view(tex, spec, rig.right, compose(trajectory[f], right_to_left), f);
    ds.left.push_back(std::move(l.image));
    ds.right.push_back(std::move(r.image));
    ds.gt_poses.push_back(trajectory[f]);
    ds.gt_depth.push_back(std::move(l.depth));
    ds.gt_region_mask.push_back(std::move(l.mask));
    ds.surface_id.push_back(std::move(l.surface));
  }
  return ds;
}

double sample_depth(const SyntheticDataset& ds, size_t frame, const Vec2& pix) {
  const DepthImage& depth = ds.gt_depth[frame];
  const auto& ids = ds.surface_id[frame];
  const int xn = std::clamp(static_cast<int>(std::lround(pix.x())), 0, depth.width - 1);
  const int yn = std::clamp(static_cast<int>(std::lround(pix.y())), 0, depth.height - 1);
  const int x0 = static_cast<int>(std::floor(pix.x())), y0 = static_cast<int>(std::floor(pix.y()));
  if (x0 < 0 || y0 < 0 || x0 + 1 >= depth.width || y0 + 1 >= depth.height) return depth.at(xn, yn);
  auto id = [&](int x, int y) { return ids[static_cast<size_t>(y) * depth.width + x]; };
  const std::int16_t s = id(x0, y0);
  if (s < 0 || id(x0 + 1, y0) != s || id(x0, y0 + 1) != s || id(x0 + 1, y0 + 1) != s) {
    return depth.at(xn, yn);
  }
  const double ax = pix.x() - x0, ay = pix.y() - y0;
  const double inv = (1 - ay) * ((1 - ax) / depth.at(x0, y0) + ax / depth.at(x0 + 1, y0)) +
                     ay * ((1 - ax) / depth.at(x0, y0 + 1) + ax / depth.at(x0 + 1, y0 + 1));
  return 1.0 / inv;
}

std::optional<Vec2> gt_correspondence(const SyntheticDataset& ds, size_t frame_i, const Vec2& pix,
                                      size_t frame_j, const StereoRig& rig) {
  if (frame_i >= ds.size() || frame_j >= ds.size()) throw std::out_of_range("gt_correspondence: bad frame");
  if (!rig.left.in_image(pix)) throw std::out_of_range("gt_correspondence: pixel outside the image");
  const int xn = static_cast<int>(std::lround(pix.x())), yn = static_cast<int>(std::lround(pix.y()));
  if (ds.gt_region_mask[frame_i].at(xn, yn)) return std::nullopt;
  const double z = sample_depth(ds, frame_i, pix);
  if (!(z > 0.0)) return std::nullopt;
  if (frame_i == frame_j) return pix;
  const Vec3 world = transform(ds.gt_poses[frame_i], unproject(rig.left, pix, z));
  const Vec3 in_j = transform(inverse(ds.gt_poses[frame_j]), world);
  if (!(in_j.z() > 1e-9)) return std::nullopt;
  const Vec2 q = project(rig.left, in_j);
  if (!rig.left.in_image(q)) return std::nullopt;
  const double zj = sample_depth(ds, frame_j, q);
  if (!(zj > 0.0) || std::abs(zj - in_j.z()) > 0.01) return std::nullopt;
  return q;
}

double dynamic_region_ncc(const SyntheticDataset& ds) {
  if (ds.size() < 2) return 0.0;
  double total = 0.0;
  int pairs = 0;
  for (size_t f = 0; f + 1 < ds.size(); ++f) {
    std::vector<double> a, b;
    const auto& m0 = ds.gt_region_mask[f];
    const auto& m1 = ds.gt_region_mask[f + 1];
    for (size_t i = 0; i < m0.bits.size(); ++i) {
      if (m0.bits[i] && m1.bits[i]) {
        a.push_back(ds.left[f].pixels[i]);
        b.push_back(ds.left[f + 1].pixels[i]);
      }
    }
    if (a.size() < 2) continue;
    const double n = static_cast<double>(a.size());
    double ma = 0, mb = 0;
    for (size_t i = 0; i < a.size(); ++i) { ma += a[i]; mb += b[i]; }
    ma /= n;
    mb /= n;
    double sab = 0, saa = 0, sbb = 0;
    for (size_t i = 0; i < a.size(); ++i) {
      sab += (a[i] - ma) * (b[i] - mb);
      saa += (a[i] - ma) * (a[i] - ma);
      sbb += (b[i] - mb) * (b[i] - mb);
    }
    if (saa <= 0.0 || sbb <= 0.0) continue;
    total += sab / std::sqrt(saa * sbb);
    ++pairs;
  }
  return pairs > 0 ? total / pairs : 0.0;
}

namespace {

std::string plane_to_string(const TexturedPlane& p) {
  std::ostringstream ss;
  ss << std::setprecision(17) << p.origin.x() << ' ' << p.origin.y() << ' ' << p.origin.z() << ' '
     << p.edge_u.x() << ' ' << p.edge_u.y() << ' ' << p.edge_u.z() << ' ' << p.edge_v.x() << ' '
     << p.edge_v.y() << ' ' << p.edge_v.z() << ' ' << p.richness << ' ' << p.feature_scale;
  return ss.str();
}

TexturedPlane plane_from_string(const std::string& s) {
  std::istringstream ss(s);
  std::array<double, 11> v{};
  for (double& x : v) {
    if (!(ss >> x)) throw IoError("scene.cfg: malformed plane entry '" + s + "'");
  }
  return plane_from(Vec3(v[0], v[1], v[2]), Vec3(v[3], v[4], v[5]), Vec3(v[6], v[7], v[8]), v[9], v[10]);
}

std::string frame_name(size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%06zu.pgm", i);
  return buf;
}

}  // namespace

void write_dataset(const std::filesystem::path& dir, const SyntheticDataset& ds, const SceneSpec& spec,
                   const StereoRig& rig) {
  namespace fs = std::filesystem;
  for (const char* sub : {"left", "right", "depth", "mask"}) fs::create_directories(dir / sub);
  std::vector<TimedPose> traj;
  for (size_t i = 0; i < ds.size(); ++i) {
    write_pgm8(dir / "left" / frame_name(i), ds.left[i]);
    write_pgm8(dir / "right" / frame_name(i), ds.right[i]);
    write_mask_pgm(dir / "mask" / frame_name(i), ds.gt_region_mask[i]);
    const DepthImage& d = ds.gt_depth[i];
    std::vector<std::uint16_t> mm(d.meters.size());
    std::transform(d.meters.begin(), d.meters.end(), mm.begin(), [](double m) {
      return static_cast<std::uint16_t>(std::clamp<long>(std::lround(m * 1000.0), 0, 65535));
    });
    write_pgm16(dir / "depth" / frame_name(i), d.width, d.height, mm);
    traj.push_back({0.1 * static_cast<double>(i), ds.gt_poses[i]});
  }
  write_trajectory_csv(dir / "gt_poses.csv", traj);

  std::ofstream cfg(dir / "scene.cfg");
  if (!cfg) throw IoError("cannot write scene.cfg in " + dir.string());
  cfg << std::setprecision(17);
  cfg << "seed = " << spec.seed << '\n'
      << "frames = " << ds.size() << '\n'
      << "width = " << spec.width << '\n'
      << "height = " << spec.height << '\n'
      << "landmark_count = " << spec.landmark_count << '\n'
      << "brightness = " << spec.brightness << '\n'
      << "fx = " << rig.left.fx << '\n'
      << "fy = " << rig.left.fy << '\n'
      << "cx = " << rig.left.cx << '\n'
      << "cy = " << rig.left.cy << '\n'
      << "baseline = " << rig.baseline << '\n'
      << "static_plane_count = " << spec.static_planes.size() << '\n';
  for (size_t i = 0; i < spec.static_planes.size(); ++i) {
    cfg << "static_plane." << i << " = " << plane_to_string(spec.static_planes[i]) << '\n';
  }
  cfg << "dynamic_region = " << plane_to_string(spec.dynamic_region) << '\n';
  if (!cfg) throw IoError("write failed: scene.cfg");
}

StoredDataset read_dataset(const std::filesystem::path& dir) {
  std::ifstream cfg(dir / "scene.cfg");
  if (!cfg) throw IoError("missing dataset: " + (dir / "scene.cfg").string());
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(cfg, line)) {
    const auto eq = line.find('=');
    if (line.empty() || line[0] == '#' || eq == std::string::npos) continue;
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  auto get = [&](const std::string& key) {
    auto it = kv.find(key);
    if (it == kv.end()) throw IoError("scene.cfg: missing key '" + key + "'");
    return it->second;
  };

  StoredDataset out;
  SceneSpec& spec = out.spec;
  spec.seed = std::stoull(get("seed"));
  spec.width = std::stoi(get("width"));
  spec.height = std::stoi(get("height"));
  spec.landmark_count = std::stoi(get("landmark_count"));
  spec.brightness = std::stod(get("brightness"));
  const int planes = std::stoi(get("static_plane_count"));
  for (int i = 0; i < planes; ++i) {
    spec.static_planes.push_back(plane_from_string(get("static_plane." + std::to_string(i))));
  }
  spec.dynamic_region = plane_from_string(get("dynamic_region"));
  CameraIntrinsics intr;
  intr.fx = std::stod(get("fx"));
  intr.fy = std::stod(get("fy"));
  intr.cx = std::stod(get("cx"));
  intr.cy = std::stod(get("cy"));
  intr.width = spec.width;
  intr.height = spec.height;
  out.rig = StereoRig::rectified(intr, std::stod(get("baseline")));

  const auto frames = static_cast<size_t>(std::stoul(get("frames")));
  const auto traj = read_trajectory_csv(dir / "gt_poses.csv");
  if (traj.size() != frames) throw IoError("gt_poses.csv length disagrees with scene.cfg frames");
  SyntheticDataset& ds = out.data;
  for (size_t i = 0; i < frames; ++i) {
    ds.left.push_back(read_pgm8(dir / "left" / frame_name(i)));
    ds.right.push_back(read_pgm8(dir / "right" / frame_name(i)));
    ds.gt_region_mask.push_back(read_mask_pgm(dir / "mask" / frame_name(i)));
    int w = 0, h = 0;
    const auto mm = read_pgm16(dir / "depth" / frame_name(i), w, h);
    DepthImage d{w, h, std::vector<double>(mm.size())};
    std::vector<std::int16_t> ids(mm.size(), -1);
    for (size_t k = 0; k < mm.size(); ++k) {
      d.meters[k] = mm[k] / 1000.0;
      if (mm[k] > 0) ids[k] = ds.gt_region_mask.back().bits[k] ? 1 : 0;
    }
    ds.gt_depth.push_back(std::move(d));
    ds.surface_id.push_back(std::move(ids));
    ds.gt_poses.push_back(traj[i].pose);
  }
  return out;
}

}  // namespace gdf
