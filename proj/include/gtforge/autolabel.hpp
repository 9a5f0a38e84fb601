#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "gtforge/registration.hpp"
#include "gtforge/scene_io.hpp"
#include "gtforge/types.hpp"

namespace gtforge {

struct RefineParams {
  double conf_threshold = 0.6;  // theta_conf
  double a_thresh = 10.0;       // m/s^2
  double w_thresh = 1.5;        // rad/s
  static constexpr int kMaxAttempts = 5;
  IcpParams icp{};
  std::uint64_t seed = 0;  // drives the per-attempt initial-guess jitter

  void validate() const;
};

struct ClusterParams {
  double ground_dist_tol = 0.15;  // m
  int ransac_iters = 200;
  double cluster_radius = 0.5;  // m
  std::size_t min_cluster_points = 10;

  void validate() const;
};

struct RefineRecord {
  std::int64_t timestamp_us = 0;
  std::int64_t track_id = 0;
  int attempts = 0;
  double confidence = 0.0;
  bool accepted_by_threshold = false;  // false means best_bbox fallback
};

struct RefineOutput {
  FrameBoxes frames;  // keyframes keep their input annotations
  std::vector<RefineRecord> records;
};

/// Propagates keyframe annotations to the remaining frames: interpolate a
/// seed box per track, then up to five ICP-to-template refinement attempts,
/// accepting the first whose confidence and motion plausibility both pass.
/// After five failures the highest-confidence box is kept. A final check
/// pass makes sizes consistent across each track.
RefineOutput refine_boxes(const ClipManifest& clip,
                          const FrameBoxes& keyframe_annotations,
                          const RefineParams& params = {});

/// Complement of the union of points_in_box masks.
PointCloud remove_objects(const PointCloud& cloud, std::span<const Box3D> boxes);

struct GroundSegmentation {
  PointCloud ground;
  PointCloud rest;
  std::vector<std::size_t> ground_indices;  // into the input cloud
  std::vector<std::size_t> rest_indices;
};

/// Seeded RANSAC plane fit; the plane normal must lie within 30 degrees of
/// +z. Ground points are the inliers within ground_dist_tol.
GroundSegmentation segment_ground(const PointCloud& cloud,
                                  const ClusterParams& params,
                                  std::uint64_t seed = 0);

/// Connected components under dist <= cluster_radius (single linkage).
/// Components smaller than min_cluster_points are discarded; clusters are
/// ordered by their smallest contained point index.
std::vector<std::vector<std::size_t>> cluster_points(const PointCloud& cloud,
                                                     const ClusterParams& params);

struct LabelRules {
  std::string default_label = "manmade";
  std::map<std::size_t, std::string> cluster_labels;  // cluster index -> name
};

/// Per-point semantic codes: clustered points take their cluster's label,
/// ground points take driveable_surface, everything else is ignore.
/// Cluster and ground indices refer to the same point space of size
/// point_count.
std::vector<std::uint8_t> label_clusters(
    std::size_t point_count, const std::vector<std::vector<std::size_t>>& clusters,
    std::span<const std::size_t> ground_indices, const LabelRules& rules);

}  // namespace gtforge
