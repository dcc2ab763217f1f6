#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "gdf/geometry.hpp"

namespace gdf::test {

inline PoseSE3 random_pose(std::mt19937_64& rng, double max_angle = 3.0, double max_shift = 2.0) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Vec3 axis(u(rng), u(rng), u(rng));
  axis.normalize();
  const double angle = max_angle * std::abs(u(rng));
  return PoseSE3::from_rotation_vector(axis * angle, Vec3(u(rng), u(rng), u(rng)) * max_shift);
}

inline Eigen::VectorXd random_unit(std::mt19937_64& rng, int dim) {
  std::normal_distribution<double> n;
  Eigen::VectorXd v(dim);
  for (int i = 0; i < dim; ++i) v(i) = n(rng);
  return v.normalized();
}

// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("gdf_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace gdf::test
