#include "gtforge/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include <nlohmann/json.hpp>

#include "gtforge/geometry.hpp"
#include "gtforge/rng.hpp"

namespace gtforge {

namespace {

constexpr double kActorFaceInset = 1e-3;  // keeps face samples strictly inside

using ordered_json = nlohmann::ordered_json;

}  // namespace

// ---------------------------------------------------------------------------
// ScenarioSpec

void ScenarioSpec::validate() const {
  if (duration_s <= 0.0 || density_pts_per_m2 <= 0.0 || noise_sigma_m < 0.0)
    throw Error(ErrorKind::invalid_spec,
                "duration and density must be positive, sigma nonnegative");
  if (frame_rate_hz <= 0 || keyframe_rate_hz <= 0 ||
      frame_rate_hz % keyframe_rate_hz != 0)
    throw Error(ErrorKind::invalid_spec,
                "frame_rate_hz must be a positive multiple of keyframe_rate_hz");
  if (ego_waypoints.empty())
    throw Error(ErrorKind::invalid_spec, "at least one ego waypoint required");
  for (std::size_t i = 1; i < ego_waypoints.size(); ++i)
    if (ego_waypoints[i].t_s <= ego_waypoints[i - 1].t_s)
      throw Error(ErrorKind::invalid_spec, "ego waypoints must be time-ordered");
  for (const ActorSpec& actor : actors)
    if (!(actor.size.x > 0.0 && actor.size.y > 0.0 && actor.size.z > 0.0))
      throw Error(ErrorKind::invalid_spec, "actor sizes must be positive");
}

Pose ScenarioSpec::ego_pose(double t_s) const {
  const auto& wp = ego_waypoints;
  if (t_s <= wp.front().t_s)
    return make_pose(wp.front().position, quat_from_yaw(wp.front().yaw));
  if (t_s >= wp.back().t_s)
    return make_pose(wp.back().position, quat_from_yaw(wp.back().yaw));
  std::size_t hi = 1;
  while (wp[hi].t_s < t_s) ++hi;
  const EgoWaypoint& a = wp[hi - 1];
  const EgoWaypoint& b = wp[hi];
  const double u = (t_s - a.t_s) / (b.t_s - a.t_s);
  const Vec3 pos = a.position + (b.position - a.position) * u;
  const double yaw = normalize_angle(a.yaw + u * angle_diff(b.yaw, a.yaw));
  return make_pose(pos, quat_from_yaw(yaw));
}

Box3D ScenarioSpec::actor_box_global(const ActorSpec& actor, double t_s) const {
  Box3D box;
  box.center = actor.start_center + Vec3{actor.vx, actor.vy, 0.0} * t_s;
  box.size = actor.size;
  const double speed = std::hypot(actor.vx, actor.vy);
  box.yaw = (actor.yaw_follows_heading && speed > 1e-9)
                ? std::atan2(actor.vy, actor.vx)
                : normalize_angle(actor.yaw);
  box.vx = actor.vx;
  box.vy = actor.vy;
  box.class_id = actor.class_id;
  box.track_id = actor.track_id;
  return box;
}

std::size_t ScenarioSpec::frame_count() const {
  return static_cast<std::size_t>(
      std::llround(duration_s * static_cast<double>(frame_rate_hz)));
}

std::size_t ScenarioSpec::keyframe_stride() const {
  return static_cast<std::size_t>(frame_rate_hz / keyframe_rate_hz);
}

// ---------------------------------------------------------------------------
// scenario file

namespace {

Vec3 vec3_of(const ordered_json& j) {
  return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()};
}

ordered_json to_json(const Vec3& v) { return {v.x, v.y, v.z}; }

}  // namespace

ScenarioSpec load_scenario(const std::filesystem::path& path) {
  std::ifstream fs(path);
  if (!fs) throw Error(ErrorKind::io, "cannot open scenario: " + path.string());
  ordered_json j = ordered_json::parse(fs, nullptr, false);
  if (j.is_discarded())
    throw Error(ErrorKind::parse, "invalid JSON in " + path.string());

  ScenarioSpec spec;
  try {
    spec.seed = j.value("seed", 0ull);
    spec.duration_s = j.at("duration_s").get<double>();
    spec.frame_rate_hz = j.value("frame_rate_hz", 10);
    spec.keyframe_rate_hz = j.value("keyframe_rate_hz", 2);
    spec.density_pts_per_m2 = j.value("density_pts_per_m2", 100.0);
    spec.noise_sigma_m = j.value("noise_sigma_m", 0.0);
    for (const auto& jw : j.at("ego_waypoints"))
      spec.ego_waypoints.push_back({jw.at("t_s").get<double>(),
                                    vec3_of(jw.at("position")),
                                    jw.value("yaw", 0.0)});
    if (j.contains("statics")) {
      for (const auto& js : j.at("statics")) {
        StaticPrimitive prim;
        const std::string kind = js.at("kind").get<std::string>();
        prim.label = class_code(js.at("label").get<std::string>());
        if (kind == "plane") {
          prim.kind = StaticPrimitive::Kind::plane;
          prim.center = vec3_of(js.at("center"));
          prim.size_x = js.at("size_x").get<double>();
          prim.size_y = js.at("size_y").get<double>();
        } else if (kind == "wall") {
          prim.kind = StaticPrimitive::Kind::wall;
          prim.a = vec3_of(js.at("a"));
          prim.b = vec3_of(js.at("b"));
          prim.z0 = js.at("z0").get<double>();
          prim.z1 = js.at("z1").get<double>();
        } else if (kind == "box") {
          prim.kind = StaticPrimitive::Kind::box;
          prim.center = vec3_of(js.at("center"));
          prim.size_x = js.at("size_x").get<double>();
          prim.size_y = js.at("size_y").get<double>();
          prim.size_z = js.at("size_z").get<double>();
          prim.yaw = js.value("yaw", 0.0);
        } else {
          throw Error(ErrorKind::invalid_spec, "unknown primitive kind " + kind);
        }
        spec.statics.push_back(prim);
      }
    }
    if (j.contains("actors")) {
      for (const auto& ja : j.at("actors")) {
        ActorSpec actor;
        actor.class_id = class_code(ja.at("class").get<std::string>());
        actor.track_id = ja.at("track_id").get<std::int64_t>();
        actor.size = vec3_of(ja.at("size"));
        actor.start_center = vec3_of(ja.at("start_center"));
        actor.vx = ja.value("vx", 0.0);
        actor.vy = ja.value("vy", 0.0);
        actor.yaw = ja.value("yaw", 0.0);
        actor.yaw_follows_heading = ja.value("yaw_follows_heading", true);
        spec.actors.push_back(actor);
      }
    }
  } catch (const ordered_json::exception& e) {
    throw Error(ErrorKind::parse, path.string() + ": " + std::string(e.what()));
  }
  spec.validate();
  return spec;
}

void write_scenario(const std::filesystem::path& path,
                    const ScenarioSpec& spec) {
  ordered_json j;
  j["seed"] = spec.seed;
  j["duration_s"] = spec.duration_s;
  j["frame_rate_hz"] = spec.frame_rate_hz;
  j["keyframe_rate_hz"] = spec.keyframe_rate_hz;
  j["density_pts_per_m2"] = spec.density_pts_per_m2;
  j["noise_sigma_m"] = spec.noise_sigma_m;
  j["ego_waypoints"] = ordered_json::array();
  for (const auto& w : spec.ego_waypoints)
    j["ego_waypoints"].push_back(
        {{"t_s", w.t_s}, {"position", to_json(w.position)}, {"yaw", w.yaw}});
  j["statics"] = ordered_json::array();
  for (const auto& p : spec.statics) {
    ordered_json jp;
    switch (p.kind) {
      case StaticPrimitive::Kind::plane:
        jp = {{"kind", "plane"},
              {"label", std::string(class_name(p.label))},
              {"center", to_json(p.center)},
              {"size_x", p.size_x},
              {"size_y", p.size_y}};
        break;
      case StaticPrimitive::Kind::wall:
        jp = {{"kind", "wall"},
              {"label", std::string(class_name(p.label))},
              {"a", to_json(p.a)},
              {"b", to_json(p.b)},
              {"z0", p.z0},
              {"z1", p.z1}};
        break;
      case StaticPrimitive::Kind::box:
        jp = {{"kind", "box"},
              {"label", std::string(class_name(p.label))},
              {"center", to_json(p.center)},
              {"size_x", p.size_x},
              {"size_y", p.size_y},
              {"size_z", p.size_z},
              {"yaw", p.yaw}};
        break;
    }
    j["statics"].push_back(std::move(jp));
  }
  j["actors"] = ordered_json::array();
  for (const auto& a : spec.actors)
    j["actors"].push_back({{"class", std::string(class_name(a.class_id))},
                           {"track_id", a.track_id},
                           {"size", to_json(a.size)},
                           {"start_center", to_json(a.start_center)},
                           {"vx", a.vx},
                           {"vy", a.vy},
                           {"yaw", a.yaw},
                           {"yaw_follows_heading", a.yaw_follows_heading}});
  atomic_write_text(path, j.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// surface sampling

namespace {

// One point per stratified cell of a rectangle spanned by (u_dir * u_len,
// v_dir * v_len) from corner `origin`, jittered within the cell.
void sample_rect(const Vec3& origin, const Vec3& u_dir, double u_len,
                 const Vec3& v_dir, double v_len, double density, Rng& rng,
                 std::vector<Vec3>& out) {
  if (u_len <= 0.0 || v_len <= 0.0) return;
  const double spacing = 1.0 / std::sqrt(density);
  const auto nu = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(u_len / spacing)));
  const auto nv = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(v_len / spacing)));
  for (std::size_t i = 0; i < nu; ++i) {
    for (std::size_t k = 0; k < nv; ++k) {
      const double fu = (static_cast<double>(i) + rng.next_double()) /
                        static_cast<double>(nu);
      const double fv = (static_cast<double>(k) + rng.next_double()) /
                        static_cast<double>(nv);
      out.push_back(origin + u_dir * (fu * u_len) + v_dir * (fv * v_len));
    }
  }
}

void sample_box_faces(const Vec3& center, const Vec3& half, double yaw,
                      double density, double inset, Rng& rng,
                      std::vector<Vec3>& out) {
  const Vec3 ex{std::cos(yaw), std::sin(yaw), 0.0};
  const Vec3 ey{-std::sin(yaw), std::cos(yaw), 0.0};
  const Vec3 ez{0.0, 0.0, 1.0};
  const double hx = half.x - inset;
  const double hy = half.y - inset;
  const double hz = half.z - inset;

  // +-x faces
  for (const double sx : {1.0, -1.0}) {
    const Vec3 origin = center + ex * (sx * hx) - ey * hy - ez * hz;
    sample_rect(origin, ey, 2.0 * hy, ez, 2.0 * hz, density, rng, out);
  }
  // +-y faces
  for (const double sy : {1.0, -1.0}) {
    const Vec3 origin = center + ey * (sy * hy) - ex * hx - ez * hz;
    sample_rect(origin, ex, 2.0 * hx, ez, 2.0 * hz, density, rng, out);
  }
  // top and bottom
  for (const double sz : {1.0, -1.0}) {
    const Vec3 origin = center + ez * (sz * hz) - ex * hx - ey * hy;
    sample_rect(origin, ex, 2.0 * hx, ey, 2.0 * hy, density, rng, out);
  }
}

void sample_primitive(const StaticPrimitive& prim, double density, Rng& rng,
                      std::vector<Vec3>& out) {
  switch (prim.kind) {
    case StaticPrimitive::Kind::plane: {
      const Vec3 origin{prim.center.x - prim.size_x * 0.5,
                        prim.center.y - prim.size_y * 0.5, prim.center.z};
      sample_rect(origin, {1, 0, 0}, prim.size_x, {0, 1, 0}, prim.size_y,
                  density, rng, out);
      break;
    }
    case StaticPrimitive::Kind::wall: {
      const Vec3 d{prim.b.x - prim.a.x, prim.b.y - prim.a.y, 0.0};
      const double len = norm(d);
      if (len <= 0.0) return;
      const Vec3 dir = d * (1.0 / len);
      const Vec3 origin{prim.a.x, prim.a.y, prim.z0};
      sample_rect(origin, dir, len, {0, 0, 1}, prim.z1 - prim.z0, density, rng,
                  out);
      break;
    }
    case StaticPrimitive::Kind::box:
      sample_box_faces(prim.center,
                       {prim.size_x * 0.5, prim.size_y * 0.5, prim.size_z * 0.5},
                       prim.yaw, density, 0.0, rng, out);
      break;
  }
}

void add_noise(std::vector<Vec3>& points, double sigma, Rng& rng) {
  if (sigma <= 0.0) return;
  auto clamped = [&] {
    const double g = rng.next_gaussian() * sigma;
    return std::clamp(g, -4.0 * sigma, 4.0 * sigma);
  };
  for (Vec3& p : points) {
    p.x += clamped();
    p.y += clamped();
    p.z += clamped();
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// generate_clip

ClipManifest generate_clip(const ScenarioSpec& spec,
                           const std::filesystem::path& out_dir) {
  spec.validate();
  std::filesystem::create_directories(out_dir / "frames");
  std::filesystem::create_directories(out_dir / "ann");
  std::filesystem::create_directories(out_dir / "labels");

  ClipManifest clip;
  clip.clip_id = "synthetic";
  for (const auto name : kClassNames) clip.classes.emplace_back(name);

  const std::size_t frames = spec.frame_count();
  const std::size_t stride = spec.keyframe_stride();

  for (std::size_t fi = 0; fi < frames; ++fi) {
    const double t = static_cast<double>(fi) / spec.frame_rate_hz;
    const auto ts_us = static_cast<std::int64_t>(std::llround(t * 1e6));
    const Pose pose = make_pose(spec.ego_pose(t).translation,
                                spec.ego_pose(t).rotation, ts_us);
    const bool keyframe = fi % stride == 0;

    // Sample the world in global coordinates, one stream per
    // (frame, primitive) so output is independent of generation order.
    PointCloud cloud;
    cloud.kind = CloudKind::lidar;
    std::vector<std::uint8_t> labels;
    auto emit = [&](const std::vector<Vec3>& pts, std::uint8_t label,
                    std::uint32_t ring) {
      for (const Vec3& p : pts) {
        cloud.positions.push_back(p);
        cloud.intensity.push_back(static_cast<float>(label));
        cloud.ring.push_back(ring);
        cloud.point_time_s.push_back(t);
        labels.push_back(label);
      }
    };

    std::vector<Vec3> buffer;
    for (std::size_t pi = 0; pi < spec.statics.size(); ++pi) {
      buffer.clear();
      Rng rng(mix_seed(spec.seed, fi, pi));
      sample_primitive(spec.statics[pi], spec.density_pts_per_m2, rng, buffer);
      add_noise(buffer, spec.noise_sigma_m, rng);
      emit(buffer, spec.statics[pi].label, static_cast<std::uint32_t>(pi));
    }
    std::vector<Box3D> actor_boxes;
    for (std::size_t ai = 0; ai < spec.actors.size(); ++ai) {
      const ActorSpec& actor = spec.actors[ai];
      const Box3D box = spec.actor_box_global(actor, t);
      actor_boxes.push_back(box);
      buffer.clear();
      Rng rng(mix_seed(spec.seed, fi, spec.statics.size() + ai));
      sample_box_faces(box.center, box.size * 0.5, box.yaw,
                       spec.density_pts_per_m2, kActorFaceInset, rng, buffer);
      add_noise(buffer, spec.noise_sigma_m, rng);
      emit(buffer, actor.class_id,
           static_cast<std::uint32_t>(spec.statics.size() + ai));
    }

    // Express in the ego frame.
    const Pose to_ego = invert_pose(pose);
    for (Vec3& p : cloud.positions) p = apply_pose(to_ego, p);

    FrameEntry entry;
    entry.timestamp_us = ts_us;
    entry.pose = pose;
    entry.keyframe = keyframe;
    const std::string stamp = std::to_string(ts_us);
    entry.lidar_path = "frames/" + stamp + ".bin";
    write_point_cloud(out_dir / entry.lidar_path, cloud);

    if (keyframe) {
      AnnotationFrame ann;
      ann.timestamp_us = ts_us;
      for (const Box3D& box : actor_boxes)
        ann.boxes.push_back(transform_box(to_ego, box));
      entry.annotation_path = "ann/" + stamp + ".json";
      write_annotations(out_dir / *entry.annotation_path, {ann});
      entry.static_label_path = "labels/" + stamp + ".labels";
      write_label_file(out_dir / *entry.static_label_path, labels);
    }
    clip.frames.push_back(std::move(entry));
  }

  write_clip(out_dir / "manifest.json", clip);
  return load_clip(out_dir / "manifest.json");
}

// ---------------------------------------------------------------------------
// analytic_occupancy

namespace {

double rect_distance_sq(const Vec3& p, const StaticPrimitive& prim) {
  switch (prim.kind) {
    case StaticPrimitive::Kind::plane: {
      const double ox =
          std::max(std::abs(p.x - prim.center.x) - prim.size_x * 0.5, 0.0);
      const double oy =
          std::max(std::abs(p.y - prim.center.y) - prim.size_y * 0.5, 0.0);
      const double oz = p.z - prim.center.z;
      return ox * ox + oy * oy + oz * oz;
    }
    case StaticPrimitive::Kind::wall: {
      const Vec3 d{prim.b.x - prim.a.x, prim.b.y - prim.a.y, 0.0};
      const double len_sq = dot(d, d);
      double s = len_sq > 0.0
                     ? ((p.x - prim.a.x) * d.x + (p.y - prim.a.y) * d.y) / len_sq
                     : 0.0;
      s = std::clamp(s, 0.0, 1.0);
      const double cx = prim.a.x + s * d.x;
      const double cy = prim.a.y + s * d.y;
      const double cz = std::clamp(p.z, prim.z0, prim.z1);
      const double dx = p.x - cx;
      const double dy = p.y - cy;
      const double dz = p.z - cz;
      return dx * dx + dy * dy + dz * dz;
    }
    case StaticPrimitive::Kind::box: {
      const double c = std::cos(-prim.yaw);
      const double s = std::sin(-prim.yaw);
      const double dx = p.x - prim.center.x;
      const double dy = p.y - prim.center.y;
      const double lx = c * dx - s * dy;
      const double ly = s * dx + c * dy;
      const double lz = p.z - prim.center.z;
      const double qx = std::abs(lx) - prim.size_x * 0.5;
      const double qy = std::abs(ly) - prim.size_y * 0.5;
      const double qz = std::abs(lz) - prim.size_z * 0.5;
      if (qx <= 0.0 && qy <= 0.0 && qz <= 0.0) {
        const double inside = -std::max({qx, qy, qz});  // depth to surface
        return inside * inside;
      }
      const double ox = std::max(qx, 0.0);
      const double oy = std::max(qy, 0.0);
      const double oz = std::max(qz, 0.0);
      return ox * ox + oy * oy + oz * oz;
    }
  }
  return 0.0;
}

bool inside_box(const Vec3& p, const Box3D& box) {
  const double c = std::cos(-box.yaw);
  const double s = std::sin(-box.yaw);
  const double dx = p.x - box.center.x;
  const double dy = p.y - box.center.y;
  const double lx = c * dx - s * dy;
  const double ly = s * dx + c * dy;
  return std::abs(lx) <= box.size.x * 0.5 && std::abs(ly) <= box.size.y * 0.5 &&
         std::abs(p.z - box.center.z) <= box.size.z * 0.5;
}

}  // namespace

VoxelGrid analytic_occupancy(const ScenarioSpec& spec,
                             std::size_t keyframe_index,
                             const OccConfig& config) {
  spec.validate();
  const std::size_t stride = spec.keyframe_stride();
  const std::size_t frame = keyframe_index * stride;
  if (frame >= spec.frame_count())
    throw Error(ErrorKind::out_of_range, "keyframe index outside the clip");
  const double t = static_cast<double>(frame) / spec.frame_rate_hz;
  const Pose pose = spec.ego_pose(t);

  std::vector<Box3D> actor_boxes;
  for (const ActorSpec& actor : spec.actors)
    actor_boxes.push_back(spec.actor_box_global(actor, t));

  VoxelGrid grid;
  grid.origin = {config.range[0], config.range[2], config.range[4]};
  grid.voxel_size = config.voxel_size;
  grid.dims = config.dims();
  grid.labels.assign(grid.cell_count(), kLabelFree);

  const double tau = config.voxel_size * 0.5;
  const double tau_sq = tau * tau;
  for (std::uint32_t ix = 0; ix < grid.dims[0]; ++ix) {
    for (std::uint32_t iy = 0; iy < grid.dims[1]; ++iy) {
      for (std::uint32_t iz = 0; iz < grid.dims[2]; ++iz) {
        const Vec3 center = apply_pose(pose, grid.voxel_center(ix, iy, iz));
        std::uint8_t label = kLabelFree;
        for (const Box3D& box : actor_boxes) {
          if (inside_box(center, box)) {
            label = box.class_id;
            break;  // actors are ordered by spec; first hit wins
          }
        }
        if (label == kLabelFree) {
          double best = std::numeric_limits<double>::infinity();
          for (const StaticPrimitive& prim : spec.statics) {
            const double d = rect_distance_sq(center, prim);
            if (d <= tau_sq && d < best) {  // ties keep the earlier primitive
              best = d;
              label = prim.label;
            }
          }
        }
        grid.labels[grid.index(ix, iy, iz)] = label;
      }
    }
  }
  return grid;
}

}  // namespace gtforge
