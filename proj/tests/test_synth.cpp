#include <cmath>
#include <fstream>

#include "doctest.h"
#include "gtforge/geometry.hpp"
#include "gtforge/synth.hpp"
#include "test_support.hpp"

using namespace gtforge;
using testsupport::TempDir;

namespace {

ScenarioSpec tiny_scenario() {
  ScenarioSpec spec;
  spec.seed = 9;
  spec.duration_s = 1.0;
  spec.frame_rate_hz = 10;
  spec.keyframe_rate_hz = 2;
  spec.density_pts_per_m2 = 60.0;
  spec.ego_waypoints = {{0.0, {0, 0, 0}, 0.0}, {1.0, {4, 0, 0}, 0.0}};

  StaticPrimitive road;
  road.kind = StaticPrimitive::Kind::plane;
  road.label = kClassDriveableSurface;
  road.center = {10, 0, 0};
  road.size_x = 40;
  road.size_y = 10;
  spec.statics.push_back(road);

  ActorSpec car;
  car.class_id = kClassCar;
  car.track_id = 1;
  car.size = {4.0, 2.0, 1.6};
  car.start_center = {12, 2, 0.8};
  car.vx = -2.0;
  car.vy = 0.0;
  spec.actors.push_back(car);
  return spec;
}

std::string hash_tree(const std::filesystem::path& root) {
  // order-stable concatenation of relative path + file bytes
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(root))
    if (entry.is_regular_file()) files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  std::string blob;
  for (const auto& file : files) {
    blob += std::filesystem::relative(file, root).string();
    std::ifstream fs(file, std::ios::binary);
    blob.append(std::istreambuf_iterator<char>(fs), {});
  }
  return blob;
}

}  // namespace

TEST_CASE("generate_clip") {
  SUBCASE("frame and keyframe cadence") {
    TempDir tmp("synth_cadence");
    ScenarioSpec spec = tiny_scenario();
    spec.duration_s = 3.0;
    const ClipManifest clip = generate_clip(spec, tmp.path());
    CHECK(clip.frames.size() == 30);
    CHECK(clip.keyframe_indices().size() == 6);
    // annotations place the parked-relative car at the exact offset
    for (const std::size_t ki : clip.keyframe_indices()) {
      const FrameEntry& frame = clip.frames[ki];
      const auto anns = read_annotations(*frame.annotation_path);
      REQUIRE(anns.size() == 1);
      REQUIRE(anns[0].boxes.size() == 1);
      const double t = frame.timestamp_us * 1e-6;
      const Box3D expect = transform_box(
          invert_pose(spec.ego_pose(t)),
          spec.actor_box_global(spec.actors[0], t));
      CHECK(bev_center_distance(anns[0].boxes[0], expect) < 1e-9);
    }
  }
  SUBCASE("zero actors means empty annotation files") {
    TempDir tmp("synth_noact");
    ScenarioSpec spec = tiny_scenario();
    spec.actors.clear();
    const ClipManifest clip = generate_clip(spec, tmp.path());
    for (const std::size_t ki : clip.keyframe_indices()) {
      const auto anns = read_annotations(*clip.frames[ki].annotation_path);
      CHECK(anns[0].boxes.empty());
    }
  }
  SUBCASE("identical specs produce byte-identical trees") {
    TempDir a("synth_det_a");
    TempDir b("synth_det_b");
    const ScenarioSpec spec = tiny_scenario();
    generate_clip(spec, a.path());
    generate_clip(spec, b.path());
    CHECK(hash_tree(a.path()) == hash_tree(b.path()));
  }
  SUBCASE("sampled points stay on their primitives within 4 sigma") {
    TempDir tmp("synth_noise");
    ScenarioSpec spec = tiny_scenario();
    spec.actors.clear();
    spec.noise_sigma_m = 0.05;
    const ClipManifest clip = generate_clip(spec, tmp.path());
    const PointCloud cloud =
        read_point_cloud(clip.frames[0].lidar_path, CloudKind::lidar);
    REQUIRE(cloud.count() > 100);
    const Pose pose = clip.frames[0].pose;
    for (const Vec3& p : cloud.positions) {
      const Vec3 global = apply_pose(pose, p);
      // distance to the road plane along z (the only primitive)
      CHECK(std::abs(global.z) <= 4.0 * std::sqrt(3.0) * spec.noise_sigma_m);
    }
  }
  SUBCASE("actor boxes contain their sampled points at sigma zero") {
    TempDir tmp("synth_contain");
    ScenarioSpec spec = tiny_scenario();
    spec.statics.clear();
    const ClipManifest clip = generate_clip(spec, tmp.path());
    std::size_t total = 0, inside = 0;
    for (const std::size_t ki : clip.keyframe_indices()) {
      const FrameEntry& frame = clip.frames[ki];
      const PointCloud cloud =
          read_point_cloud(frame.lidar_path, CloudKind::lidar);
      const auto anns = read_annotations(*frame.annotation_path);
      const std::vector<bool> mask = points_in_box(cloud, anns[0].boxes[0]);
      total += mask.size();
      for (const bool m : mask) inside += m;
    }
    REQUIRE(total > 0);
    CHECK(static_cast<double>(inside) >= 0.99 * static_cast<double>(total));
  }
}

TEST_CASE("analytic_occupancy") {
  OccConfig config;
  config.range = {-8.0, 8.0, -8.0, 8.0, -3.0, 5.0};
  config.voxel_size = 0.4;  // 40 x 40 x 20

  SUBCASE("ground plane fills exactly the iz = 7 layer") {
    ScenarioSpec spec;
    spec.duration_s = 1.0;
    spec.ego_waypoints = {{0.0, {0, 0, 0}, 0.0}};
    StaticPrimitive road;
    road.kind = StaticPrimitive::Kind::plane;
    road.label = kClassDriveableSurface;
    road.center = {0, 0, 0};
    road.size_x = 100;
    road.size_y = 100;
    spec.statics.push_back(road);

    const VoxelGrid grid = analytic_occupancy(spec, 0, config);
    for (std::uint32_t ix = 0; ix < grid.dims[0]; ++ix)
      for (std::uint32_t iy = 0; iy < grid.dims[1]; ++iy)
        for (std::uint32_t iz = 0; iz < grid.dims[2]; ++iz) {
          const std::uint8_t expect =
              iz == 7 ? kClassDriveableSurface : kLabelFree;
          CHECK(grid.at(ix, iy, iz) == expect);
        }
  }
  SUBCASE("an actor box small enough to sit in one voxel labels it") {
    ScenarioSpec spec;
    spec.duration_s = 1.0;
    spec.ego_waypoints = {{0.0, {0, 0, 0}, 0.0}};
    ActorSpec ped;
    ped.class_id = kClassPedestrian;
    ped.track_id = 1;
    ped.size = {0.3, 0.3, 0.3};
    ped.start_center = {1.0, 1.0, 1.2};  // voxel (22, 22, 10) center
    ped.yaw_follows_heading = false;
    spec.actors.push_back(ped);

    const VoxelGrid grid = analytic_occupancy(spec, 0, config);
    std::size_t occupied = 0;
    for (const std::uint8_t label : grid.labels) occupied += label != kLabelFree;
    CHECK(occupied == 1);
    CHECK(grid.at(22, 22, 10) == kClassPedestrian);
  }
  SUBCASE("empty scenario is all free") {
    ScenarioSpec spec;
    spec.duration_s = 1.0;
    spec.ego_waypoints = {{0.0, {0, 0, 0}, 0.0}};
    const VoxelGrid grid = analytic_occupancy(spec, 0, config);
    for (const std::uint8_t label : grid.labels) CHECK(label == kLabelFree);
  }
  SUBCASE("keyframe index bounds") {
    ScenarioSpec spec;
    spec.duration_s = 1.0;
    spec.ego_waypoints = {{0.0, {0, 0, 0}, 0.0}};
    CHECK_THROWS_AS((void)analytic_occupancy(spec, 99, config), Error);
  }
}

TEST_CASE("scenario files round-trip") {
  TempDir tmp("scenario_io");
  const ScenarioSpec spec = tiny_scenario();
  write_scenario(tmp.path() / "s.json", spec);
  const ScenarioSpec back = load_scenario(tmp.path() / "s.json");
  CHECK(back.seed == spec.seed);
  CHECK(back.duration_s == spec.duration_s);
  CHECK(back.statics.size() == spec.statics.size());
  CHECK(back.actors.size() == spec.actors.size());
  CHECK(back.actors[0].vx == spec.actors[0].vx);
  CHECK(back.ego_waypoints.size() == 2);
}
