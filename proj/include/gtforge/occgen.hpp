#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <vector>

#include "gtforge/autolabel.hpp"
#include "gtforge/registration.hpp"
#include "gtforge/scene_io.hpp"
#include "gtforge/trajectory.hpp"
#include "gtforge/types.hpp"

namespace gtforge {

struct OccConfig {
  // xmin, xmax, ymin, ymax, zmin, zmax
  std::array<double, 6> range{-60.0, 60.0, -40.0, 40.0, -3.0, 5.0};
  double voxel_size = 0.4;
  double filter_radius = 0.3;
  std::size_t filter_min_neighbors = 4;
  bool use_non_keyframes = true;

  /// Throws unless extents are positive and integral multiples of
  /// voxel_size (within 1e-9). Defaults give 300 x 200 x 20.
  std::array<std::uint32_t, 3> dims() const;
  void validate() const { (void)dims(); }
  bool contains(const Vec3& p) const {
    return p.x >= range[0] && p.x < range[1] && p.y >= range[2] &&
           p.y < range[3] && p.z >= range[4] && p.z < range[5];
  }
};

/// Aggregated object points in the box-local frame of one track.
struct ObjectAggregate {
  std::int64_t track_id = 0;
  std::uint8_t class_id = 0;
  PointCloud template_cloud;
  std::size_t source_frame_count = 0;
};

struct SeparatedFrame {
  std::map<std::int64_t, PointCloud> objects;  // track_id -> ego-frame points
  PointCloud static_points;
};

/// Exact partition of a keyframe cloud: points inside boxes go to the box
/// whose center is nearest (ties to the lower track_id), the rest is static.
SeparatedFrame separate_frame(const PointCloud& cloud,
                              std::span<const Box3D> boxes);

/// Builds global-frame tracks out of per-keyframe ego-frame annotations.
std::vector<Track> build_global_tracks(const ClipManifest& clip,
                                       const FrameBoxes& keyframe_annotations);

/// Per-track templates: keyframe crops in box-local coordinates, optionally
/// densified with ICP-aligned non-keyframe crops (merged only when ICP
/// converges with confidence >= 0.5).
std::vector<ObjectAggregate> aggregate_objects(const ClipManifest& clip,
                                               const std::vector<Track>& tracks,
                                               const IcpParams& icp_params,
                                               bool use_non_keyframes);

/// Keyframe static clouds transformed by their poses into the global frame
/// and concatenated, with per-point labels attached.
PointCloud build_static_scene(
    const ClipManifest& clip, const std::vector<PointCloud>& static_per_keyframe,
    const std::vector<std::vector<std::uint8_t>>& labels_per_keyframe);

/// Static scene mapped into the frame's ego coordinates plus each aggregate
/// placed at its frame box pose, labeled with the object class; points
/// outside config.range are dropped.
PointCloud compose_frame(const PointCloud& labeled_static_global,
                         const Pose& pose,
                         std::span<const ObjectAggregate> aggregates,
                         std::span<const Box3D> frame_boxes,
                         const OccConfig& config);

/// Keeps point i iff at least min_neighbors OTHER points of the original
/// cloud lie within radius.
PointCloud radius_filter(const PointCloud& cloud, double radius,
                         std::size_t min_neighbors);

/// Occupancy by floor-indexing; each occupied voxel takes the label of the
/// point nearest its center (ties: lower label code, then lower point
/// index). Voxels whose nearest point is labeled ignore become free.
VoxelGrid voxelize_semantic(const PointCloud& cloud, const OccConfig& config);

/// Full pipeline: separate, aggregate, build, compose, filter, voxelize;
/// one "<timestamp_us>.occ" grid per keyframe under out_dir. Deterministic
/// for fixed inputs regardless of thread count.
void generate_occupancy(
    const ClipManifest& clip, const FrameBoxes& keyframe_annotations,
    const std::map<std::int64_t, std::vector<std::uint8_t>>& static_labels,
    const std::filesystem::path& out_dir, const OccConfig& config = {},
    const IcpParams& icp_params = {}, int threads = 1);

}  // namespace gtforge
