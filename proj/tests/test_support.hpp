#pragma once

#include <Eigen/Geometry>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "freeflyer/geom.hpp"

namespace ff::test {

// Random rotation built from Eigen's AngleAxis so rotation oracles do not
// share code with the library's quaternion path.
inline geom::Mat3 random_rotation(std::mt19937_64& eng) {
  auto u = [&] { return (eng() >> 11) * 0x1.0p-53; };
  double z = 2.0 * u() - 1.0;
  double phi = (2.0 * u() - 1.0) * kPi;
  double r = std::sqrt(std::max(0.0, 1.0 - z * z));
  Eigen::Vector3d axis(r * std::cos(phi), r * std::sin(phi), z);
  double angle = (2.0 * u() - 1.0) * kPi;
  return Eigen::AngleAxisd(angle, axis).toRotationMatrix();
}

inline double frobenius_diff(const geom::Mat3& a, const geom::Mat3& b) {
  return (a - b).norm();
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

inline std::filesystem::path fresh_dir(const std::string& tag) {
  auto dir = std::filesystem::temp_directory_path() /
             ("freeflyer_test_" + tag + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace ff::test
