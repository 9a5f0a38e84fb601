#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "gtforge/geometry.hpp"
#include "gtforge/rng.hpp"
#include "gtforge/types.hpp"

namespace testsupport {

// Forces a genuine float rounding. gcc 11's SLP vectorizer at -O3 merges
// paired double->float->double chains and drops the narrowing; the volatile
// keeps the f32 value observable.
inline double f32(double v) {
  volatile float f = static_cast<float>(v);
  return f;
}

// Scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("gtforge_test_" + tag + "_" + std::to_string(counter_++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  static inline int counter_ = 0;
  std::filesystem::path path_;
};

inline gtforge::Vec3 random_point(gtforge::Rng& rng, double extent) {
  return {rng.uniform(-extent, extent), rng.uniform(-extent, extent),
          rng.uniform(-extent, extent)};
}

inline gtforge::PointCloud random_cloud(gtforge::Rng& rng, std::size_t n,
                                        double extent = 10.0) {
  gtforge::PointCloud cloud;
  cloud.positions.reserve(n);
  for (std::size_t i = 0; i < n; ++i)
    cloud.positions.push_back(random_point(rng, extent));
  return cloud;
}

inline gtforge::Pose random_pose(gtforge::Rng& rng, double max_shift = 5.0) {
  const gtforge::Quat q{rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0),
                        rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
  return gtforge::make_pose(random_point(rng, max_shift), q);
}

inline gtforge::Pose random_yaw_pose(gtforge::Rng& rng, double max_shift = 5.0) {
  return gtforge::make_pose(random_point(rng, max_shift),
                            gtforge::quat_from_yaw(rng.uniform(-3.14, 3.14)));
}

}  // namespace testsupport
