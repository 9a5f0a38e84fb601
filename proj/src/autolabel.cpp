#include "gtforge/autolabel.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

#include "gtforge/geometry.hpp"
#include "gtforge/kdtree.hpp"
#include "gtforge/rng.hpp"
#include "gtforge/trajectory.hpp"

namespace gtforge {

void RefineParams::validate() const {
  if (conf_threshold <= 0.0 || a_thresh <= 0.0 || w_thresh <= 0.0)
    throw Error(ErrorKind::invalid_spec, "refine thresholds must be positive");
  icp.validate();
}

void ClusterParams::validate() const {
  if (ground_dist_tol <= 0.0 || ransac_iters <= 0 || cluster_radius <= 0.0 ||
      min_cluster_points == 0)
    throw Error(ErrorKind::invalid_spec, "cluster parameters must be positive");
}

// ---------------------------------------------------------------------------
// remove_objects

PointCloud remove_objects(const PointCloud& cloud,
                          std::span<const Box3D> boxes) {
  std::vector<bool> keep(cloud.count(), true);
  for (const Box3D& box : boxes) {
    const std::vector<bool> inside = points_in_box(cloud, box);
    for (std::size_t i = 0; i < keep.size(); ++i)
      if (inside[i]) keep[i] = false;
  }
  return filter_cloud(cloud, keep);
}

// ---------------------------------------------------------------------------
// segment_ground

GroundSegmentation segment_ground(const PointCloud& cloud,
                                  const ClusterParams& params,
                                  std::uint64_t seed) {
  params.validate();
  const std::size_t n = cloud.count();
  if (n < 3)
    throw Error(ErrorKind::too_few_points, "plane fit needs at least 3 points");

  constexpr double kMinNormalZ = 0.8660254037844387;  // cos(30 deg)
  Rng rng(mix_seed(seed, 0x9d0457a1));

  bool found = false;
  Vec3 best_normal;
  double best_offset = 0.0;
  std::size_t best_inliers = 0;

  for (int iter = 0; iter < params.ransac_iters; ++iter) {
    const std::size_t i = rng.next_below(n);
    std::size_t j = rng.next_below(n);
    std::size_t k = rng.next_below(n);
    if (i == j || i == k || j == k) continue;
    const Vec3& a = cloud.positions[i];
    Vec3 normal = cross(cloud.positions[j] - a, cloud.positions[k] - a);
    const double len = norm(normal);
    if (len < 1e-12) continue;  // collinear sample
    normal = normal * (1.0 / len);
    if (normal.z < 0.0) normal = normal * -1.0;
    if (normal.z < kMinNormalZ) continue;

    const double offset = dot(normal, a);
    std::size_t inliers = 0;
    for (const Vec3& p : cloud.positions)
      if (std::abs(dot(normal, p) - offset) <= params.ground_dist_tol) ++inliers;

    if (inliers > best_inliers) {
      best_inliers = inliers;
      best_normal = normal;
      best_offset = offset;
      found = true;
    }
  }
  if (!found)
    throw Error(ErrorKind::no_ground_found,
                "no plane within 30 degrees of +z among sampled hypotheses");

  GroundSegmentation out;
  std::vector<bool> is_ground(n, false);
  for (std::size_t idx = 0; idx < n; ++idx) {
    if (std::abs(dot(best_normal, cloud.positions[idx]) - best_offset) <=
        params.ground_dist_tol) {
      is_ground[idx] = true;
      out.ground_indices.push_back(idx);
    } else {
      out.rest_indices.push_back(idx);
    }
  }
  out.ground = filter_cloud(cloud, is_ground);
  std::vector<bool> not_ground(n);
  for (std::size_t idx = 0; idx < n; ++idx) not_ground[idx] = !is_ground[idx];
  out.rest = filter_cloud(cloud, not_ground);
  return out;
}

// ---------------------------------------------------------------------------
// cluster_points

std::vector<std::vector<std::size_t>> cluster_points(
    const PointCloud& cloud, const ClusterParams& params) {
  params.validate();
  const std::size_t n = cloud.count();
  std::vector<std::vector<std::size_t>> clusters;
  if (n == 0) return clusters;

  const KdTree tree(cloud.positions);
  std::vector<bool> visited(n, false);
  for (std::size_t start = 0; start < n; ++start) {
    if (visited[start]) continue;
    std::vector<std::size_t> component;
    std::deque<std::size_t> frontier{start};
    visited[start] = true;
    while (!frontier.empty()) {
      const std::size_t cur = frontier.front();
      frontier.pop_front();
      component.push_back(cur);
      for (std::size_t nb :
           tree.radius_indices(cloud.positions[cur], params.cluster_radius)) {
        if (!visited[nb]) {
          visited[nb] = true;
          frontier.push_back(nb);
        }
      }
    }
    if (component.size() >= params.min_cluster_points) {
      std::sort(component.begin(), component.end());
      clusters.push_back(std::move(component));
    }
  }
  // BFS from ascending start indices already yields clusters ordered by
  // smallest member.
  return clusters;
}

// ---------------------------------------------------------------------------
// label_clusters

std::vector<std::uint8_t> label_clusters(
    std::size_t point_count,
    const std::vector<std::vector<std::size_t>>& clusters,
    std::span<const std::size_t> ground_indices, const LabelRules& rules) {
  const std::uint8_t default_code = class_code(rules.default_label);
  std::vector<std::uint8_t> labels(point_count, kLabelIgnore);
  for (std::size_t ci = 0; ci < clusters.size(); ++ci) {
    std::uint8_t code = default_code;
    if (const auto it = rules.cluster_labels.find(ci);
        it != rules.cluster_labels.end())
      code = class_code(it->second);
    for (std::size_t idx : clusters[ci]) labels.at(idx) = code;
  }
  for (std::size_t idx : ground_indices) labels.at(idx) = kClassDriveableSurface;
  return labels;
}

// ---------------------------------------------------------------------------
// refine_boxes

namespace {

struct TrackContext {
  Track global;             // keyframe samples in the global frame
  PointCloud template_local;  // aggregated keyframe points, box-local
  Vec3 canonical_size;
  std::vector<std::pair<std::int64_t, Box3D>> accepted_global;
};

Pose box_pose(const Box3D& box) {
  return make_pose(box.center, quat_from_yaw(box.yaw));
}

Box3D reposition_box(const Box3D& box, const Pose& pose) {
  Box3D out = box;
  out.center = pose.translation;
  out.yaw = quat_yaw(pose.rotation);
  return out;
}

}  // namespace

RefineOutput refine_boxes(const ClipManifest& clip,
                          const FrameBoxes& keyframe_annotations,
                          const RefineParams& params) {
  params.validate();

  for (std::size_t ki : clip.keyframe_indices())
    if (!keyframe_annotations.count(clip.frames[ki].timestamp_us))
      throw Error(ErrorKind::missing_keyframes,
                  "keyframe " + std::to_string(clip.frames[ki].timestamp_us) +
                      " has no annotation entry");

  // Build per-track context from the annotated keyframes.
  std::map<std::int64_t, TrackContext> tracks;
  for (const auto& frame : clip.frames) {
    const auto ann = keyframe_annotations.find(frame.timestamp_us);
    if (ann == keyframe_annotations.end()) continue;
    PointCloud cloud;
    bool cloud_loaded = false;
    for (const Box3D& box : ann->second) {
      if (!box.track_id)
        throw Error(ErrorKind::invalid_box,
                    "keyframe annotations must carry track ids");
      auto [it, inserted] = tracks.try_emplace(*box.track_id);
      TrackContext& ctx = it->second;
      if (inserted) {
        ctx.global.track_id = *box.track_id;
        ctx.canonical_size = box.size;
      }
      ctx.global.add_sample(frame.timestamp_us, transform_box(frame.pose, box));
      ctx.accepted_global.emplace_back(frame.timestamp_us,
                                       transform_box(frame.pose, box));
      if (!cloud_loaded) {
        cloud = read_point_cloud(frame.lidar_path, CloudKind::lidar);
        cloud_loaded = true;
      }
      PointCloud crop = filter_cloud(cloud, points_in_box(cloud, box));
      crop.labels.clear();
      const Pose to_local = invert_pose(box_pose(box));
      append_cloud(ctx.template_local, transform_cloud(to_local, crop));
    }
  }

  RefineOutput out;
  for (const auto& [ts, boxes] : keyframe_annotations) out.frames[ts] = boxes;

  // Remaining frames, in clip order so each track's accepted set grows
  // monotonically in time.
  for (const auto& frame : clip.frames) {
    if (keyframe_annotations.count(frame.timestamp_us)) continue;
    PointCloud cloud;
    bool cloud_loaded = false;
    std::vector<Box3D> frame_out;

    for (auto& [track_id, ctx] : tracks) {
      if (ctx.global.samples.size() < 2) continue;  // nothing to propagate
      const std::int64_t targets[] = {frame.timestamp_us};
      const auto seeds = interpolate_track(ctx.global, targets);
      if (seeds.empty()) continue;  // outside the annotated span

      const Box3D seed_global = seeds.front().second;
      const Box3D seed_ego = transform_box(invert_pose(frame.pose), seed_global);
      if (!cloud_loaded) {
        cloud = read_point_cloud(frame.lidar_path, CloudKind::lidar);
        cloud_loaded = true;
      }
      const PointCloud crop =
          filter_cloud(cloud, points_in_box(cloud, seed_ego));
      const Pose seed_pose = box_pose(seed_ego);
      const PointCloud crop_local =
          transform_cloud(invert_pose(seed_pose), crop);

      RefineRecord record;
      record.timestamp_us = frame.timestamp_us;
      record.track_id = track_id;

      Box3D best_box = seed_ego;
      double max_conf = 0.0;
      bool accepted = false;
      for (int attempt = 0; attempt < RefineParams::kMaxAttempts; ++attempt) {
        ++record.attempts;

        Box3D refined = seed_ego;
        double conf = 0.0;
        if (crop_local.count() >= 3 && ctx.template_local.count() >= 3) {
          // The refiner re-runs on the same inputs; attempts differ by a
          // seeded jitter of the ICP initial guess (attempt 0 unperturbed).
          Pose initial;
          if (attempt > 0) {
            Rng jitter(mix_seed(params.seed,
                                static_cast<std::uint64_t>(track_id),
                                static_cast<std::uint64_t>(frame.timestamp_us),
                                static_cast<std::uint64_t>(attempt)));
            initial = make_pose({jitter.uniform(-0.2, 0.2),
                                 jitter.uniform(-0.2, 0.2), 0.0},
                                quat_from_yaw(jitter.uniform(-kPi / 60.0,
                                                             kPi / 60.0)));
          }
          try {
            const IcpResult icp =
                icp_align(crop_local, ctx.template_local, params.icp, initial);
            refined = reposition_box(
                seed_ego, compose(seed_pose, invert_pose(icp.transform)));
            conf = icp.confidence;
          } catch (const Error&) {
            refined = seed_ego;  // degenerate geometry: keep the seed
            conf = 0.0;
          }
        }

        if (conf > max_conf) {
          max_conf = conf;
          best_box = refined;
        }
        if (conf >= params.conf_threshold) {
          // Motion plausibility of the running track with this candidate.
          Track trial = ctx.global;
          trial.samples = ctx.accepted_global;
          const Box3D cand_global = transform_box(frame.pose, refined);
          auto pos = std::lower_bound(
              trial.samples.begin(), trial.samples.end(), frame.timestamp_us,
              [](const auto& s, std::int64_t t) { return s.first < t; });
          trial.samples.insert(pos, {frame.timestamp_us, cand_global});
          const MotionParams motion = motion_params(trial);
          if (motion.a_cal <= params.a_thresh &&
              motion.w_cal <= params.w_thresh) {
            best_box = refined;
            record.confidence = conf;
            record.accepted_by_threshold = true;
            accepted = true;
            break;
          }
        }
      }
      if (!accepted) record.confidence = max_conf;

      const Box3D accepted_global = transform_box(frame.pose, best_box);
      auto pos = std::lower_bound(
          ctx.accepted_global.begin(), ctx.accepted_global.end(),
          frame.timestamp_us,
          [](const auto& s, std::int64_t t) { return s.first < t; });
      ctx.accepted_global.insert(pos, {frame.timestamp_us, accepted_global});

      frame_out.push_back(best_box);
      out.records.push_back(record);
    }
    std::sort(frame_out.begin(), frame_out.end(),
              [](const Box3D& a, const Box3D& b) {
                return a.track_id.value_or(-1) < b.track_id.value_or(-1);
              });
    out.frames[frame.timestamp_us] = std::move(frame_out);
  }

  // Check pass: size consistency per track, output timestamps monotone by
  // map ordering.
  for (auto& [ts, boxes] : out.frames) {
    for (Box3D& box : boxes) {
      if (!box.track_id) continue;
      const auto it = tracks.find(*box.track_id);
      if (it != tracks.end()) box.size = it->second.canonical_size;
    }
  }
  return out;
}

}  // namespace gtforge
