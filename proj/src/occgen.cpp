#include "gtforge/occgen.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <mutex>
#include <thread>

#include "gtforge/geometry.hpp"
#include "gtforge/kdtree.hpp"

namespace gtforge {

namespace {

Pose box_pose(const Box3D& box) {
  return make_pose(box.center, quat_from_yaw(box.yaw));
}

}  // namespace

std::array<std::uint32_t, 3> OccConfig::dims() const {
  if (voxel_size <= 0.0)
    throw Error(ErrorKind::invalid_spec, "voxel_size must be positive");
  if (filter_radius <= 0.0)
    throw Error(ErrorKind::invalid_spec, "filter_radius must be positive");
  std::array<std::uint32_t, 3> out{};
  for (int axis = 0; axis < 3; ++axis) {
    const double extent = range[2 * axis + 1] - range[2 * axis];
    if (extent <= 0.0)
      throw Error(ErrorKind::invalid_spec, "range extents must be positive");
    const double cells = extent / voxel_size;
    if (std::abs(cells - std::round(cells)) > 1e-9)
      throw Error(ErrorKind::invalid_spec,
                  "range extent must be an integral multiple of voxel_size");
    out[axis] = static_cast<std::uint32_t>(std::llround(cells));
  }
  return out;
}

// ---------------------------------------------------------------------------
// separate_frame

SeparatedFrame separate_frame(const PointCloud& cloud,
                              std::span<const Box3D> boxes) {
  const std::size_t n = cloud.count();
  // -1 = static; otherwise index into boxes.
  std::vector<std::ptrdiff_t> owner(n, -1);
  std::vector<double> owner_dist(n, 0.0);

  for (std::size_t bi = 0; bi < boxes.size(); ++bi) {
    const Box3D& box = boxes[bi];
    const std::vector<bool> inside = points_in_box(cloud, box);
    for (std::size_t i = 0; i < n; ++i) {
      if (!inside[i]) continue;
      const double d = dist_sq(cloud.positions[i], box.center);
      if (owner[i] < 0) {
        owner[i] = static_cast<std::ptrdiff_t>(bi);
        owner_dist[i] = d;
        continue;
      }
      const Box3D& prev = boxes[static_cast<std::size_t>(owner[i])];
      const bool closer =
          d < owner_dist[i] ||
          (d == owner_dist[i] && box.track_id.value_or(0) <
                                     prev.track_id.value_or(0));
      if (closer) {
        owner[i] = static_cast<std::ptrdiff_t>(bi);
        owner_dist[i] = d;
      }
    }
  }

  SeparatedFrame out;
  std::vector<bool> is_static(n);
  for (std::size_t i = 0; i < n; ++i) is_static[i] = owner[i] < 0;
  out.static_points = filter_cloud(cloud, is_static);
  for (std::size_t bi = 0; bi < boxes.size(); ++bi) {
    std::vector<bool> mine(n, false);
    bool any = false;
    for (std::size_t i = 0; i < n; ++i)
      if (owner[i] == static_cast<std::ptrdiff_t>(bi)) {
        mine[i] = true;
        any = true;
      }
    if (!any) continue;
    const std::int64_t id =
        boxes[bi].track_id.value_or(static_cast<std::int64_t>(bi));
    append_cloud(out.objects[id], filter_cloud(cloud, mine));
  }
  return out;
}

// ---------------------------------------------------------------------------
// track construction

std::vector<Track> build_global_tracks(const ClipManifest& clip,
                                       const FrameBoxes& keyframe_annotations) {
  std::map<std::int64_t, Track> by_id;
  for (const auto& frame : clip.frames) {
    const auto it = keyframe_annotations.find(frame.timestamp_us);
    if (it == keyframe_annotations.end()) continue;
    for (const Box3D& box : it->second) {
      if (!box.track_id)
        throw Error(ErrorKind::invalid_box,
                    "ground-truth boxes must carry track ids");
      Track& track = by_id[*box.track_id];
      track.track_id = *box.track_id;
      track.add_sample(frame.timestamp_us, transform_box(frame.pose, box));
    }
  }
  std::vector<Track> out;
  out.reserve(by_id.size());
  for (auto& [id, track] : by_id) out.push_back(std::move(track));
  return out;
}

// ---------------------------------------------------------------------------
// aggregate_objects

std::vector<ObjectAggregate> aggregate_objects(const ClipManifest& clip,
                                               const std::vector<Track>& tracks,
                                               const IcpParams& icp_params,
                                               bool use_non_keyframes) {
  for (const Track& track : tracks)
    if (track.samples.empty())
      throw Error(ErrorKind::empty_track, "track without annotated keyframes");

  std::vector<ObjectAggregate> aggregates(tracks.size());
  for (std::size_t ti = 0; ti < tracks.size(); ++ti) {
    aggregates[ti].track_id = tracks[ti].track_id;
    aggregates[ti].class_id = tracks[ti].class_id;
  }

  for (const auto& frame : clip.frames) {
    const bool is_key = frame.keyframe;
    if (!is_key && !use_non_keyframes) continue;

    PointCloud cloud;
    bool cloud_loaded = false;
    for (std::size_t ti = 0; ti < tracks.size(); ++ti) {
      const Track& track = tracks[ti];
      ObjectAggregate& agg = aggregates[ti];

      Box3D box_global;
      if (is_key) {
        const auto it = std::lower_bound(
            track.samples.begin(), track.samples.end(), frame.timestamp_us,
            [](const auto& s, std::int64_t t) { return s.first < t; });
        if (it == track.samples.end() || it->first != frame.timestamp_us)
          continue;
        box_global = it->second;
      } else {
        if (track.samples.size() < 2) continue;
        const std::int64_t targets[] = {frame.timestamp_us};
        const auto fake = interpolate_track(track, targets);
        if (fake.empty()) continue;
        box_global = fake.front().second;
      }

      if (!cloud_loaded) {
        cloud = read_point_cloud(frame.lidar_path, CloudKind::lidar);
        cloud_loaded = true;
      }
      const Box3D box_ego = transform_box(invert_pose(frame.pose), box_global);
      PointCloud crop = filter_cloud(cloud, points_in_box(cloud, box_ego));
      if (crop.count() == 0) continue;
      crop.labels.clear();
      PointCloud local = transform_cloud(invert_pose(box_pose(box_ego)), crop);

      if (is_key) {
        append_cloud(agg.template_cloud, local);
        ++agg.source_frame_count;
        continue;
      }
      // Interpolated frame: align onto the running template before merging.
      if (local.count() < 3 || agg.template_cloud.count() < 3) continue;
      try {
        const IcpResult icp =
            icp_align(local, agg.template_cloud, icp_params, Pose{});
        if (icp.converged && icp.confidence >= 0.5) {
          append_cloud(agg.template_cloud, transform_cloud(icp.transform, local));
          ++agg.source_frame_count;
        }
      } catch (const Error&) {
        // unalignable frame: dropped for this track
      }
    }
  }
  return aggregates;
}

// ---------------------------------------------------------------------------
// build_static_scene

PointCloud build_static_scene(
    const ClipManifest& clip, const std::vector<PointCloud>& static_per_keyframe,
    const std::vector<std::vector<std::uint8_t>>& labels_per_keyframe) {
  const std::vector<std::size_t> keys = clip.keyframe_indices();
  if (static_per_keyframe.size() != keys.size() ||
      labels_per_keyframe.size() != keys.size())
    throw Error(ErrorKind::label_length_mismatch,
                "one static cloud and label array required per keyframe");

  PointCloud global;
  for (std::size_t i = 0; i < keys.size(); ++i) {
    const PointCloud& local = static_per_keyframe[i];
    if (labels_per_keyframe[i].size() != local.count())
      throw Error(ErrorKind::label_length_mismatch,
                  "label array length does not match static cloud");
    PointCloud labeled = transform_cloud(clip.frames[keys[i]].pose, local);
    labeled.labels = labels_per_keyframe[i];
    append_cloud(global, labeled);
  }
  return global;
}

// ---------------------------------------------------------------------------
// compose_frame

PointCloud compose_frame(const PointCloud& labeled_static_global,
                         const Pose& pose,
                         std::span<const ObjectAggregate> aggregates,
                         std::span<const Box3D> frame_boxes,
                         const OccConfig& config) {
  PointCloud combined = transform_cloud(invert_pose(pose), labeled_static_global);

  for (const Box3D& box : frame_boxes) {
    const ObjectAggregate* agg = nullptr;
    for (const ObjectAggregate& a : aggregates)
      if (box.track_id && a.track_id == *box.track_id) {
        agg = &a;
        break;
      }
    if (agg == nullptr)
      throw Error(ErrorKind::missing_aggregate,
                  "no aggregate for track " +
                      std::to_string(box.track_id.value_or(-1)));
    PointCloud placed = transform_cloud(box_pose(box), agg->template_cloud);
    placed.labels.assign(placed.count(), agg->class_id);
    append_cloud(combined, placed);
  }

  std::vector<bool> in_range(combined.count());
  for (std::size_t i = 0; i < combined.count(); ++i)
    in_range[i] = config.contains(combined.positions[i]);
  return filter_cloud(combined, in_range);
}

// ---------------------------------------------------------------------------
// radius_filter

PointCloud radius_filter(const PointCloud& cloud, double radius,
                         std::size_t min_neighbors) {
  if (radius <= 0.0)
    throw Error(ErrorKind::invalid_spec, "radius must be positive");
  if (min_neighbors == 0) return cloud;

  const KdTree tree(cloud.positions);
  std::vector<bool> keep(cloud.count());
  // count_within sees the point itself, hence the +1.
  const std::size_t needed = min_neighbors + 1;
  for (std::size_t i = 0; i < cloud.count(); ++i)
    keep[i] = tree.count_within(cloud.positions[i], radius, needed) >= needed;
  return filter_cloud(cloud, keep);
}

// ---------------------------------------------------------------------------
// voxelize_semantic

VoxelGrid voxelize_semantic(const PointCloud& cloud, const OccConfig& config) {
  if (!cloud.has_labels() && cloud.count() > 0)
    throw Error(ErrorKind::missing_labels,
                "voxelization needs per-point labels");

  VoxelGrid grid;
  grid.origin = {config.range[0], config.range[2], config.range[4]};
  grid.voxel_size = config.voxel_size;
  grid.dims = config.dims();
  grid.labels.assign(grid.cell_count(), kLabelFree);
  if (cloud.count() == 0) return grid;

  std::vector<std::size_t> occupied;
  std::vector<bool> seen(grid.cell_count(), false);
  for (std::size_t i = 0; i < cloud.count(); ++i) {
    const Vec3& p = cloud.positions[i];
    if (!config.contains(p)) continue;
    const auto ix = static_cast<std::uint32_t>(
        std::floor((p.x - grid.origin.x) / grid.voxel_size));
    const auto iy = static_cast<std::uint32_t>(
        std::floor((p.y - grid.origin.y) / grid.voxel_size));
    const auto iz = static_cast<std::uint32_t>(
        std::floor((p.z - grid.origin.z) / grid.voxel_size));
    if (ix >= grid.dims[0] || iy >= grid.dims[1] || iz >= grid.dims[2])
      continue;  // boundary guard against float rounding
    const std::size_t idx = grid.index(ix, iy, iz);
    if (!seen[idx]) {
      seen[idx] = true;
      occupied.push_back(idx);
    }
  }

  const KdTree tree(cloud.positions);
  for (const std::size_t idx : occupied) {
    const auto iz = static_cast<std::uint32_t>(idx % grid.dims[2]);
    const auto iy = static_cast<std::uint32_t>((idx / grid.dims[2]) % grid.dims[1]);
    const auto ix = static_cast<std::uint32_t>(idx / grid.dims[2] / grid.dims[1]);
    const Vec3 center = grid.voxel_center(ix, iy, iz);

    const KdTree::Hit hit = tree.nearest(center);
    // Gather every point at exactly the winning distance, then break ties
    // by lower label code and lower point index.
    std::uint8_t best_label = cloud.labels[hit.index];
    std::size_t best_index = hit.index;
    for (const std::size_t cand :
         tree.radius_sq_indices(center, hit.dist_sq)) {
      if (dist_sq(cloud.positions[cand], center) != hit.dist_sq) continue;
      const std::uint8_t label = cloud.labels[cand];
      if (label < best_label ||
          (label == best_label && cand < best_index)) {
        best_label = label;
        best_index = cand;
      }
    }
    grid.labels[idx] = best_label == kLabelIgnore ? kLabelFree : best_label;
  }
  return grid;
}

// ---------------------------------------------------------------------------
// generate_occupancy

namespace {

void parallel_for(std::size_t n, int threads,
                  const std::function<void(std::size_t)>& fn) {
  if (threads <= 0)
    threads = static_cast<int>(std::thread::hardware_concurrency());
  if (threads < 1) threads = 1;
  const std::size_t workers = std::min<std::size_t>(threads, n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace

void generate_occupancy(
    const ClipManifest& clip, const FrameBoxes& keyframe_annotations,
    const std::map<std::int64_t, std::vector<std::uint8_t>>& static_labels,
    const std::filesystem::path& out_dir, const OccConfig& config,
    const IcpParams& icp_params, int threads) {
  config.validate();
  const std::vector<std::size_t> keys = clip.keyframe_indices();

  // Fail fast, before any grid is written.
  for (const std::size_t ki : keys) {
    const std::int64_t ts = clip.frames[ki].timestamp_us;
    if (!keyframe_annotations.count(ts))
      throw Error(ErrorKind::missing_keyframes,
                  "keyframe " + std::to_string(ts) + " has no annotations");
    if (!static_labels.count(ts))
      throw Error(ErrorKind::missing_labels,
                  "keyframe " + std::to_string(ts) + " has no static labels");
  }

  // Separate each keyframe into per-track objects and labeled static points.
  std::vector<PointCloud> static_per_keyframe(keys.size());
  std::vector<std::vector<std::uint8_t>> labels_per_keyframe(keys.size());
  for (std::size_t i = 0; i < keys.size(); ++i) {
    const FrameEntry& frame = clip.frames[keys[i]];
    PointCloud cloud = read_point_cloud(frame.lidar_path, CloudKind::lidar);
    cloud.labels = static_labels.at(frame.timestamp_us);
    if (cloud.labels.size() != cloud.count())
      throw Error(ErrorKind::label_length_mismatch,
                  "static label count does not match cloud at " +
                      std::to_string(frame.timestamp_us));
    SeparatedFrame separated =
        separate_frame(cloud, keyframe_annotations.at(frame.timestamp_us));
    labels_per_keyframe[i] = separated.static_points.labels;
    separated.static_points.labels.clear();
    static_per_keyframe[i] = std::move(separated.static_points);
  }

  const std::vector<Track> tracks =
      build_global_tracks(clip, keyframe_annotations);
  const std::vector<ObjectAggregate> aggregates = aggregate_objects(
      clip, tracks, icp_params, config.use_non_keyframes);
  const PointCloud global_static =
      build_static_scene(clip, static_per_keyframe, labels_per_keyframe);

  std::filesystem::create_directories(out_dir);
  parallel_for(keys.size(), threads, [&](std::size_t i) {
    const FrameEntry& frame = clip.frames[keys[i]];
    const PointCloud combined =
        compose_frame(global_static, frame.pose, aggregates,
                      keyframe_annotations.at(frame.timestamp_us), config);
    const PointCloud filtered = radius_filter(combined, config.filter_radius,
                                              config.filter_min_neighbors);
    const VoxelGrid grid = voxelize_semantic(filtered, config);
    write_voxel_grid(out_dir / (std::to_string(frame.timestamp_us) + ".occ"),
                     grid);
  });
}

}  // namespace gtforge
