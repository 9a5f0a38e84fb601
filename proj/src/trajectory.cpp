#include "gtforge/trajectory.hpp"

#include <algorithm>
#include <cmath>

#include "gtforge/geometry.hpp"

namespace gtforge {

void Track::add_sample(std::int64_t timestamp_us, const Box3D& box) {
  if (!samples.empty() && timestamp_us <= samples.back().first)
    throw Error(ErrorKind::non_monotonic_timestamps,
                "track samples must have strictly increasing timestamps");
  if (box.track_id && *box.track_id != track_id)
    throw Error(ErrorKind::track_mismatch, "sample track_id differs");
  if (!samples.empty() && box.class_id != class_id)
    throw Error(ErrorKind::track_mismatch, "sample class_id differs");
  if (samples.empty()) class_id = box.class_id;
  samples.emplace_back(timestamp_us, box);
}

Box3D interpolate_box(const Box3D& b0, std::int64_t t0_us, const Box3D& b1,
                      std::int64_t t1_us, std::int64_t t_us) {
  if (t0_us >= t1_us)
    throw Error(ErrorKind::out_of_range, "interpolation needs t0 < t1");
  if (t_us < t0_us || t_us > t1_us)
    throw Error(ErrorKind::out_of_range, "t outside [t0, t1]");
  if (b0.track_id != b1.track_id || b0.class_id != b1.class_id)
    throw Error(ErrorKind::track_mismatch,
                "endpoints belong to different tracks");

  const double span_s = static_cast<double>(t1_us - t0_us) * 1e-6;
  const double u = static_cast<double>(t_us - t0_us) /
                   static_cast<double>(t1_us - t0_us);

  Box3D out;
  out.center = b0.center + (b1.center - b0.center) * u;
  out.yaw = normalize_angle(b0.yaw + u * angle_diff(b1.yaw, b0.yaw));
  out.size = (t_us - t0_us <= t1_us - t_us) ? b0.size : b1.size;
  out.vx = (b1.center.x - b0.center.x) / span_s;
  out.vy = (b1.center.y - b0.center.y) / span_s;
  out.class_id = b0.class_id;
  out.track_id = b0.track_id;
  return out;
}

std::vector<std::pair<std::int64_t, Box3D>> interpolate_track(
    const Track& track, std::span<const std::int64_t> targets_us) {
  if (track.samples.empty())
    throw Error(ErrorKind::empty_track, "cannot interpolate an empty track");
  std::vector<std::pair<std::int64_t, Box3D>> out;
  for (const std::int64_t t : targets_us) {
    if (t < track.first_timestamp() || t > track.last_timestamp()) continue;
    // First sample with timestamp >= t brackets the target from above.
    const auto it = std::lower_bound(
        track.samples.begin(), track.samples.end(), t,
        [](const auto& sample, std::int64_t ts) { return sample.first < ts; });
    if (it->first == t) {
      out.emplace_back(t, it->second);
      continue;
    }
    const auto& hi = *it;
    const auto& lo = *std::prev(it);
    out.emplace_back(t,
                     interpolate_box(lo.second, lo.first, hi.second, hi.first, t));
  }
  return out;
}

namespace {

struct Bev {
  double x = 0.0;
  double y = 0.0;
};

// Central differences on the interior, one-sided at the ends.
std::vector<Bev> finite_difference(const std::vector<Bev>& values,
                                   const std::vector<double>& t) {
  const std::size_t n = values.size();
  std::vector<Bev> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = i == 0 ? 0 : i - 1;
    const std::size_t hi = i + 1 == n ? i : i + 1;
    const double dt = t[hi] - t[lo];
    out[i] = {(values[hi].x - values[lo].x) / dt,
              (values[hi].y - values[lo].y) / dt};
  }
  return out;
}

}  // namespace

MotionParams motion_params(const Track& track) {
  const std::size_t n = track.samples.size();
  if (n == 0)
    throw Error(ErrorKind::empty_track, "cannot assess an empty track");

  MotionParams params;
  std::vector<double> t(n);
  std::vector<Bev> centers(n);
  std::vector<double> yaws(n);
  for (std::size_t i = 0; i < n; ++i) {
    t[i] = static_cast<double>(track.samples[i].first) * 1e-6;
    const Box3D& b = track.samples[i].second;
    centers[i] = {b.center.x, b.center.y};
    yaws[i] = b.yaw;
  }

  if (n >= 2) {
    for (std::size_t i = 0; i + 1 < n; ++i) {
      const double w =
          std::abs(angle_diff(yaws[i + 1], yaws[i])) / (t[i + 1] - t[i]);
      params.w_cal = std::max(params.w_cal, w);
    }
  }
  if (n >= 3) {
    const std::vector<Bev> vel = finite_difference(centers, t);
    const std::vector<Bev> acc = finite_difference(vel, t);
    for (const Bev& a : acc)
      params.a_cal = std::max(params.a_cal, std::hypot(a.x, a.y));
  }
  return params;
}

}  // namespace gtforge
