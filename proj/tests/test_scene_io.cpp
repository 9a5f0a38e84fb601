#include <cstring>
#include <fstream>
#include <limits>

#include "doctest.h"
#include "gtforge/geometry.hpp"
#include "gtforge/scene_io.hpp"
#include "test_support.hpp"

using namespace gtforge;
using testsupport::TempDir;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream fs(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(fs), {});
}

// Random clouds whose coordinates are exactly representable as f32, so a
// write/read cycle is the identity in memory as well as on disk.
PointCloud random_lidar(Rng& rng, std::size_t n) {
  PointCloud cloud;
  cloud.kind = CloudKind::lidar;
  for (std::size_t i = 0; i < n; ++i) {
    cloud.positions.push_back({testsupport::f32(rng.uniform(-50, 50)),
                               testsupport::f32(rng.uniform(-50, 50)),
                               testsupport::f32(rng.uniform(-5, 5))});
    cloud.intensity.push_back(static_cast<float>(rng.uniform(0, 255)));
    cloud.ring.push_back(static_cast<std::uint32_t>(rng.next_below(128)));
    cloud.point_time_s.push_back(rng.uniform(0, 30));
  }
  return cloud;
}

PointCloud random_radar(Rng& rng, std::size_t n) {
  PointCloud cloud;
  cloud.kind = CloudKind::radar;
  for (std::size_t i = 0; i < n; ++i) {
    cloud.positions.push_back({testsupport::f32(rng.uniform(-50, 50)),
                               testsupport::f32(rng.uniform(-50, 50)),
                               testsupport::f32(rng.uniform(-5, 5))});
    cloud.power.push_back(static_cast<float>(rng.uniform(0, 40)));
    cloud.snr.push_back(static_cast<float>(rng.uniform(0, 30)));
    cloud.v_xr.push_back(static_cast<float>(rng.uniform(-30, 30)));
    cloud.v_yr.push_back(static_cast<float>(rng.uniform(-30, 30)));
    cloud.t_diff.push_back(static_cast<float>(rng.uniform(0, 0.3)));
  }
  return cloud;
}

}  // namespace

TEST_CASE("point-cloud binary round trips") {
  TempDir tmp("pc");
  Rng rng(101);

  SUBCASE("lidar file round-trips byte-identically") {
    const PointCloud cloud = random_lidar(rng, 2);
    const auto p1 = tmp.path() / "a.bin";
    const auto p2 = tmp.path() / "b.bin";
    write_point_cloud(p1, cloud);
    CHECK(std::filesystem::file_size(p1) == 2 * kLidarRecordBytes);
    const PointCloud loaded = read_point_cloud(p1, CloudKind::lidar);
    CHECK(loaded.count() == 2);
    write_point_cloud(p2, loaded);
    CHECK(slurp(p1) == slurp(p2));
  }
  SUBCASE("empty file loads as an empty cloud") {
    const auto p = tmp.path() / "empty.bin";
    std::ofstream(p, std::ios::binary).close();
    CHECK(read_point_cloud(p, CloudKind::lidar).count() == 0);
  }
  SUBCASE("truncated lidar file is a SizeMismatch") {
    const auto p = tmp.path() / "bad.bin";
    std::ofstream(p, std::ios::binary) << std::string(30, '\0');
    CHECK_THROWS_WITH_AS((void)read_point_cloud(p, CloudKind::lidar),
                         doctest::Contains("not a multiple"), Error);
  }
  SUBCASE("NaN positions are rejected at load") {
    PointCloud cloud = random_lidar(rng, 3);
    cloud.positions[1].y = std::numeric_limits<double>::quiet_NaN();
    const auto p = tmp.path() / "nan.bin";
    // validate() would catch it on write, so craft the file by hand
    PointCloud ok = cloud;
    ok.positions[1].y = 0.0;
    write_point_cloud(p, ok);
    std::string bytes = slurp(p);
    const std::uint32_t nan_bits = 0x7fc00000u;
    std::memcpy(bytes.data() + kLidarRecordBytes + 4, &nan_bits, 4);
    std::ofstream(p, std::ios::binary) << bytes;
    CHECK_THROWS_AS((void)read_point_cloud(p, CloudKind::lidar), Error);
  }
  SUBCASE("value-level identity over seeded random instances") {
    for (int trial = 0; trial < 25; ++trial) {
      const PointCloud lidar = random_lidar(rng, 1 + rng.next_below(40));
      const auto pl = tmp.path() / "l.bin";
      write_point_cloud(pl, lidar);
      const PointCloud lback = read_point_cloud(pl, CloudKind::lidar);
      REQUIRE(lback.count() == lidar.count());
      CHECK(lback.positions == lidar.positions);
      CHECK(lback.intensity == lidar.intensity);
      CHECK(lback.ring == lidar.ring);
      CHECK(lback.point_time_s == lidar.point_time_s);

      const PointCloud radar = random_radar(rng, 1 + rng.next_below(40));
      const auto pr = tmp.path() / "r.bin";
      write_point_cloud(pr, radar);
      const PointCloud rback = read_point_cloud(pr, CloudKind::radar);
      REQUIRE(rback.count() == radar.count());
      CHECK(rback.positions == radar.positions);
      CHECK(rback.power == radar.power);
      CHECK(rback.t_diff == radar.t_diff);
      CHECK(std::filesystem::file_size(pr) ==
            radar.count() * kRadarRecordBytes);
    }
  }
}

TEST_CASE("clip manifest validation") {
  TempDir tmp("clip");
  // minimal lidar files so path resolution succeeds
  PointCloud cloud;
  cloud.kind = CloudKind::lidar;
  cloud.positions = {{0, 0, 0}};
  cloud.intensity = {0.f};
  cloud.ring = {0};
  cloud.point_time_s = {0.0};
  write_point_cloud(tmp.path() / "f0.bin", cloud);
  write_point_cloud(tmp.path() / "f1.bin", cloud);

  auto manifest = [&](std::int64_t t0, std::int64_t t1, bool with_ann) {
    std::string ann = with_ann ? R"("annotation_path": "ann.json",)" : "";
    return std::string(R"({
      "clip_id": "c",
      "classes": ["car"],
      "frames": [
        {"timestamp_us": )" + std::to_string(t0) + R"(, "lidar_path": "f0.bin",
         "pose": {"translation": [0,0,0], "rotation": [1,0,0,0]},
         "keyframe": true, )" + ann + R"( "static_label_path": "s.labels"},
        {"timestamp_us": )" + std::to_string(t1) + R"(, "lidar_path": "f1.bin",
         "pose": {"translation": [0,0,0], "rotation": [1,0,0,0]},
         "keyframe": false}
      ]
    })");
  };
  std::ofstream(tmp.path() / "ann.json") << R"([{"timestamp_us": 100, "boxes": []}])";
  std::ofstream(tmp.path() / "s.labels") << std::string(1, char(255));

  SUBCASE("well-formed manifest loads with one keyframe") {
    std::ofstream(tmp.path() / "m.json") << manifest(100, 200, true);
    const ClipManifest clip = load_clip(tmp.path() / "m.json");
    CHECK(clip.frames.size() == 2);
    CHECK(clip.keyframe_indices() == std::vector<std::size_t>{0});
  }
  SUBCASE("equal timestamps rejected") {
    std::ofstream(tmp.path() / "m.json") << manifest(100, 100, true);
    CHECK_THROWS_AS((void)load_clip(tmp.path() / "m.json"), Error);
  }
  SUBCASE("keyframe without annotation rejected") {
    std::ofstream(tmp.path() / "m.json") << manifest(100, 200, false);
    try {
      (void)load_clip(tmp.path() / "m.json");
      FAIL("expected KeyframeMissingAnnotation");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::keyframe_missing_annotation);
    }
  }
  SUBCASE("non-keyframes must not reference annotations") {
    std::string text = manifest(100, 200, true);
    const std::string needle = "\"keyframe\": false}";
    text.replace(text.find(needle), needle.size(),
                 "\"keyframe\": false, \"annotation_path\": \"ann.json\"}");
    std::ofstream(tmp.path() / "m.json") << text;
    try {
      (void)load_clip(tmp.path() / "m.json");
      FAIL("expected Parse");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::parse);
    }
  }
}

TEST_CASE("annotation files") {
  TempDir tmp("ann");

  SUBCASE("one box record round-trips") {
    Box3D box;
    box.center = {1, 2, 0.5};
    box.size = {4.5, 1.9, 1.6};
    box.yaw = 0.25;
    box.vx = 3.0;
    box.vy = -1.0;
    box.class_id = kClassCar;
    box.track_id = 7;
    const auto p = tmp.path() / "a.json";
    write_annotations(p, {{123456, {box}}});
    const auto frames = read_annotations(p);
    REQUIRE(frames.size() == 1);
    REQUIRE(frames[0].boxes.size() == 1);
    const Box3D& b = frames[0].boxes[0];
    CHECK(b.center == box.center);
    CHECK(b.size == box.size);
    CHECK(b.yaw == box.yaw);
    CHECK(b.track_id == box.track_id);
    CHECK_FALSE(b.score.has_value());

    // write o read is a fixed point at the byte level too
    const auto p2 = tmp.path() / "b.json";
    write_annotations(p2, frames);
    CHECK(slurp(p) == slurp(p2));
  }
  SUBCASE("zero-extent size is InvalidBox") {
    std::ofstream(tmp.path() / "bad.json") << R"([{"timestamp_us": 0, "boxes": [
      {"track_id": 1, "class": "car", "center": [0,0,0], "size": [0,1,1],
       "yaw": 0, "velocity": [0,0]}]}])";
    try {
      (void)read_annotations(tmp.path() / "bad.json");
      FAIL("expected InvalidBox");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::invalid_box);
    }
  }
  SUBCASE("yaw 3*pi/2 in the file normalizes to -pi/2") {
    std::ofstream(tmp.path() / "yaw.json") << R"([{"timestamp_us": 0, "boxes": [
      {"track_id": 1, "class": "car", "center": [0,0,0], "size": [1,1,1],
       "yaw": 4.71238898038469, "velocity": [0,0]}]}])";
    const auto frames = read_annotations(tmp.path() / "yaw.json");
    CHECK(frames[0].boxes[0].yaw == doctest::Approx(-kPi / 2));
  }
}

TEST_CASE("voxel grid container") {
  TempDir tmp("grid");

  SUBCASE("1x1x1 grid: header layout fixes the byte count") {
    // magic 4 + version 4 + origin 24 + voxel_size 8 + dims 12 + 1 label
    const std::size_t expected = 4 + 4 + 24 + 8 + 12 + 1;
    VoxelGrid g;
    g.dims = {1, 1, 1};
    g.labels = {kLabelFree};
    const auto p = tmp.path() / "g.occ";
    write_voxel_grid(p, g);
    CHECK(std::filesystem::file_size(p) == expected);
    const VoxelGrid back = read_voxel_grid(p);
    CHECK(back.dims == g.dims);
    CHECK(back.labels == g.labels);
    const auto p2 = tmp.path() / "g2.occ";
    write_voxel_grid(p2, back);
    CHECK(slurp(p) == slurp(p2));
  }
  SUBCASE("wrong magic") {
    const auto p = tmp.path() / "bad.occ";
    std::ofstream(p, std::ios::binary) << std::string(64, 'X');
    try {
      (void)read_voxel_grid(p);
      FAIL("expected BadMagic");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::bad_magic);
    }
  }
  SUBCASE("unsupported version") {
    VoxelGrid g;
    g.dims = {1, 1, 1};
    g.labels = {kLabelFree};
    const auto p = tmp.path() / "v2.occ";
    write_voxel_grid(p, g);
    std::string bytes = slurp(p);
    bytes[4] = 2;  // version field
    std::ofstream(p, std::ios::binary) << bytes;
    try {
      (void)read_voxel_grid(p);
      FAIL("expected BadVersion");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::bad_version);
    }
  }
  SUBCASE("short label payload is a SizeMismatch") {
    VoxelGrid g;
    g.dims = {3, 2, 2};
    g.labels.assign(12, kLabelFree);
    const auto p = tmp.path() / "short.occ";
    write_voxel_grid(p, g);
    std::string bytes = slurp(p);
    bytes.resize(bytes.size() - 5);
    std::ofstream(p, std::ios::binary) << bytes;
    try {
      (void)read_voxel_grid(p);
      FAIL("expected SizeMismatch");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::size_mismatch);
    }
  }
  SUBCASE("label codes outside the table are a load error") {
    VoxelGrid g;
    g.dims = {1, 1, 2};
    g.labels = {kLabelFree, kLabelFree};
    const auto p = tmp.path() / "codes.occ";
    write_voxel_grid(p, g);
    std::string bytes = slurp(p);
    bytes[bytes.size() - 1] = 77;  // not in {0..10, 254, 255}
    std::ofstream(p, std::ios::binary) << bytes;
    try {
      (void)read_voxel_grid(p);
      FAIL("expected InvalidLabel");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::invalid_label);
    }
  }
  SUBCASE("random grids round-trip byte-exactly") {
    Rng rng(301);
    for (int trial = 0; trial < 25; ++trial) {
      VoxelGrid g;
      g.origin = testsupport::random_point(rng, 50.0);
      g.voxel_size = rng.uniform(0.1, 1.0);
      g.dims = {static_cast<std::uint32_t>(1 + rng.next_below(8)),
                static_cast<std::uint32_t>(1 + rng.next_below(8)),
                static_cast<std::uint32_t>(1 + rng.next_below(8))};
      g.labels.resize(g.cell_count());
      for (auto& code : g.labels) {
        const auto pick = rng.next_below(13);
        code = pick < 11 ? static_cast<std::uint8_t>(pick)
                         : (pick == 11 ? kLabelIgnore : kLabelFree);
      }
      const auto p1 = tmp.path() / "r1.occ";
      const auto p2 = tmp.path() / "r2.occ";
      write_voxel_grid(p1, g);
      write_voxel_grid(p2, read_voxel_grid(p1));
      CHECK(slurp(p1) == slurp(p2));
    }
  }
}

TEST_CASE("label files validate length and codes") {
  TempDir tmp("labels");
  write_label_file(tmp.path() / "x.labels", {0, 7, 254, 255});
  CHECK(read_label_file(tmp.path() / "x.labels", 4) ==
        std::vector<std::uint8_t>{0, 7, 254, 255});
  CHECK_THROWS_AS((void)read_label_file(tmp.path() / "x.labels", 5), Error);
}
