#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "gtforge/types.hpp"

namespace gtforge {

/// Time-ordered samples of one object. All samples share track and class.
struct Track {
  std::int64_t track_id = 0;
  std::uint8_t class_id = 0;
  std::vector<std::pair<std::int64_t, Box3D>> samples;

  /// Appends a sample, enforcing strictly increasing timestamps and
  /// matching track/class ids.
  void add_sample(std::int64_t timestamp_us, const Box3D& box);

  std::int64_t first_timestamp() const { return samples.front().first; }
  std::int64_t last_timestamp() const { return samples.back().first; }
};

struct MotionParams {
  double a_cal = 0.0;  // peak acceleration magnitude, m/s^2
  double w_cal = 0.0;  // peak yaw rate magnitude, rad/s
};

/// Uniform-velocity interpolation between two keyframe boxes.
/// Center is linear, yaw follows the shortest arc, size comes from the
/// nearer keyframe (ties to b0), velocity is the keyframe displacement rate.
Box3D interpolate_box(const Box3D& b0, std::int64_t t0_us, const Box3D& b1,
                      std::int64_t t1_us, std::int64_t t_us);

/// Fake-box sequence at the target timestamps. Targets outside the track's
/// span yield no box; output order matches input order.
std::vector<std::pair<std::int64_t, Box3D>> interpolate_track(
    const Track& track, std::span<const std::int64_t> targets_us);

/// Peak acceleration / yaw rate over the track. BEV velocities come from
/// central finite differences (one-sided at the ends); accelerations apply
/// the same scheme to the velocities.
MotionParams motion_params(const Track& track);

}  // namespace gtforge
