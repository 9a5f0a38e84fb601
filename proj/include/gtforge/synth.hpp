#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "gtforge/occgen.hpp"
#include "gtforge/scene_io.hpp"
#include "gtforge/types.hpp"

namespace gtforge {

struct EgoWaypoint {
  double t_s = 0.0;
  Vec3 position;
  double yaw = 0.0;
};

struct StaticPrimitive {
  enum class Kind { plane, wall, box };
  Kind kind = Kind::plane;
  std::uint8_t label = kClassDriveableSurface;

  // plane: horizontal rectangle, center + size_x/size_y
  // box: yawed box, center + size_x/size_y/size_z
  Vec3 center;
  double size_x = 0.0;
  double size_y = 0.0;
  double size_z = 0.0;
  double yaw = 0.0;

  // wall: vertical strip from a to b between z0 and z1
  Vec3 a;
  Vec3 b;
  double z0 = 0.0;
  double z1 = 0.0;
};

struct ActorSpec {
  std::uint8_t class_id = kClassCar;
  std::int64_t track_id = 0;
  Vec3 size{4.5, 1.9, 1.6};
  Vec3 start_center;  // global, at t = 0
  double vx = 0.0;
  double vy = 0.0;
  double yaw = 0.0;
  bool yaw_follows_heading = true;
};

struct ScenarioSpec {
  std::uint64_t seed = 0;
  double duration_s = 3.0;
  int frame_rate_hz = 10;
  int keyframe_rate_hz = 2;
  std::vector<EgoWaypoint> ego_waypoints;
  std::vector<StaticPrimitive> statics;
  std::vector<ActorSpec> actors;
  double density_pts_per_m2 = 100.0;
  double noise_sigma_m = 0.0;

  void validate() const;
  Pose ego_pose(double t_s) const;
  Box3D actor_box_global(const ActorSpec& actor, double t_s) const;
  std::size_t frame_count() const;
  std::size_t keyframe_stride() const;
};

ScenarioSpec load_scenario(const std::filesystem::path& path);
void write_scenario(const std::filesystem::path& path, const ScenarioSpec& spec);

/// Writes lidar binaries, poses, keyframe annotations, and per-keyframe
/// static label files under out_dir, plus manifest.json. Byte-identical
/// output for identical (spec, seed).
ClipManifest generate_clip(const ScenarioSpec& spec,
                           const std::filesystem::path& out_dir);

/// Ground-truth grid straight from the scenario geometry: a voxel is
/// occupied iff its center lies within voxel_size/2 of a primitive surface
/// or inside an actor box. No point sampling involved.
VoxelGrid analytic_occupancy(const ScenarioSpec& spec, std::size_t keyframe_index,
                             const OccConfig& config);

}  // namespace gtforge
