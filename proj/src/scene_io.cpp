#include "gtforge/scene_io.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "gtforge/geometry.hpp"

namespace gtforge {

namespace {

using ordered_json = nlohmann::ordered_json;

// -- little-endian packing ---------------------------------------------------

void put_u32(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 24) & 0xff));
}

void put_f32(std::string& out, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(out, bits);
}

void put_f64(std::string& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_u32(out, static_cast<std::uint32_t>(bits & 0xffffffffu));
  put_u32(out, static_cast<std::uint32_t>(bits >> 32));
}

std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) |
         (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

float get_f32(const unsigned char* p) {
  const std::uint32_t bits = get_u32(p);
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

double get_f64(const unsigned char* p) {
  const std::uint64_t bits = static_cast<std::uint64_t>(get_u32(p)) |
                             (static_cast<std::uint64_t>(get_u32(p + 4)) << 32);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

std::string read_file_bytes(const std::filesystem::path& path) {
  std::ifstream fs(path, std::ios::binary);
  if (!fs)
    throw Error(ErrorKind::io, "cannot open file: " + path.string());
  std::ostringstream ss;
  ss << fs.rdbuf();
  if (fs.bad())
    throw Error(ErrorKind::io, "failed reading file: " + path.string());
  return std::move(ss).str();
}

ordered_json parse_json_file(const std::filesystem::path& path) {
  const std::string text = read_file_bytes(path);
  ordered_json j = ordered_json::parse(text, nullptr, false);
  if (j.is_discarded())
    throw Error(ErrorKind::parse, "invalid JSON in " + path.string());
  return j;
}

Vec3 vec3_from_json(const ordered_json& j, const char* field) {
  if (!j.is_array() || j.size() != 3)
    throw Error(ErrorKind::parse,
                std::string(field) + " must be an array of 3 numbers");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

}  // namespace

void atomic_write_bytes(const std::filesystem::path& path,
                        const std::string& bytes) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream fs(tmp, std::ios::binary | std::ios::trunc);
    if (!fs)
      throw Error(ErrorKind::io, "cannot open for write: " + tmp.string());
    fs.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!fs)
      throw Error(ErrorKind::io, "failed writing: " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec)
    throw Error(ErrorKind::io, "rename failed for " + path.string() + ": " +
                                   ec.message());
}

void atomic_write_text(const std::filesystem::path& path,
                       const std::string& text) {
  atomic_write_bytes(path, text);
}

// ---------------------------------------------------------------------------
// Point clouds

PointCloud read_point_cloud(const std::filesystem::path& path, CloudKind kind) {
  if (kind == CloudKind::plain)
    throw Error(ErrorKind::parse, "point-cloud files are lidar or radar");
  const std::string bytes = read_file_bytes(path);
  const std::size_t record =
      kind == CloudKind::lidar ? kLidarRecordBytes : kRadarRecordBytes;
  if (bytes.size() % record != 0)
    throw Error(ErrorKind::size_mismatch,
                path.string() + ": size " + std::to_string(bytes.size()) +
                    " is not a multiple of " + std::to_string(record));
  const std::size_t n = bytes.size() / record;
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());

  PointCloud cloud;
  cloud.kind = kind;
  cloud.positions.resize(n);
  if (kind == CloudKind::lidar) {
    cloud.intensity.resize(n);
    cloud.ring.resize(n);
    cloud.point_time_s.resize(n);
    for (std::size_t i = 0; i < n; ++i, p += record) {
      cloud.positions[i] = {get_f32(p), get_f32(p + 4), get_f32(p + 8)};
      cloud.intensity[i] = get_f32(p + 12);
      cloud.ring[i] = get_u32(p + 16);
      cloud.point_time_s[i] = get_f64(p + 20);
    }
  } else {
    cloud.power.resize(n);
    cloud.snr.resize(n);
    cloud.v_xr.resize(n);
    cloud.v_yr.resize(n);
    cloud.t_diff.resize(n);
    for (std::size_t i = 0; i < n; ++i, p += record) {
      cloud.positions[i] = {get_f32(p), get_f32(p + 4), get_f32(p + 8)};
      cloud.power[i] = get_f32(p + 12);
      cloud.snr[i] = get_f32(p + 16);
      cloud.v_xr[i] = get_f32(p + 20);
      cloud.v_yr[i] = get_f32(p + 24);
      cloud.t_diff[i] = get_f32(p + 28);
    }
  }
  for (const auto& pos : cloud.positions)
    if (!std::isfinite(pos.x) || !std::isfinite(pos.y) || !std::isfinite(pos.z))
      throw Error(ErrorKind::non_finite,
                  path.string() + ": NaN/Inf position rejected at load");
  return cloud;
}

void write_point_cloud(const std::filesystem::path& path,
                       const PointCloud& cloud) {
  if (cloud.kind == CloudKind::plain)
    throw Error(ErrorKind::parse, "point-cloud files are lidar or radar");
  cloud.validate();
  const std::size_t n = cloud.count();
  std::string out;
  if (cloud.kind == CloudKind::lidar) {
    out.reserve(n * kLidarRecordBytes);
    for (std::size_t i = 0; i < n; ++i) {
      put_f32(out, static_cast<float>(cloud.positions[i].x));
      put_f32(out, static_cast<float>(cloud.positions[i].y));
      put_f32(out, static_cast<float>(cloud.positions[i].z));
      put_f32(out, cloud.intensity.empty() ? 0.0f : cloud.intensity[i]);
      put_u32(out, cloud.ring.empty() ? 0u : cloud.ring[i]);
      put_f64(out, cloud.point_time_s.empty() ? 0.0 : cloud.point_time_s[i]);
    }
  } else {
    out.reserve(n * kRadarRecordBytes);
    for (std::size_t i = 0; i < n; ++i) {
      put_f32(out, static_cast<float>(cloud.positions[i].x));
      put_f32(out, static_cast<float>(cloud.positions[i].y));
      put_f32(out, static_cast<float>(cloud.positions[i].z));
      put_f32(out, cloud.power.empty() ? 0.0f : cloud.power[i]);
      put_f32(out, cloud.snr.empty() ? 0.0f : cloud.snr[i]);
      put_f32(out, cloud.v_xr.empty() ? 0.0f : cloud.v_xr[i]);
      put_f32(out, cloud.v_yr.empty() ? 0.0f : cloud.v_yr[i]);
      put_f32(out, cloud.t_diff.empty() ? 0.0f : cloud.t_diff[i]);
    }
  }
  atomic_write_bytes(path, out);
}

// ---------------------------------------------------------------------------
// Clip manifest

std::vector<std::size_t> ClipManifest::keyframe_indices() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < frames.size(); ++i)
    if (frames[i].keyframe) out.push_back(i);
  return out;
}

ClipManifest load_clip(const std::filesystem::path& manifest_path) {
  const ordered_json j = parse_json_file(manifest_path);
  const std::filesystem::path base = manifest_path.parent_path();
  ClipManifest clip;
  try {
    clip.clip_id = j.at("clip_id").get<std::string>();
    for (const auto& c : j.at("classes"))
      clip.classes.push_back(c.get<std::string>());
    for (const auto& jf : j.at("frames")) {
      FrameEntry f;
      f.timestamp_us = jf.at("timestamp_us").get<std::int64_t>();
      f.lidar_path = (base / jf.at("lidar_path").get<std::string>()).string();
      if (jf.contains("radar_paths"))
        for (const auto& rp : jf.at("radar_paths"))
          f.radar_paths.push_back((base / rp.get<std::string>()).string());
      const auto& jp = jf.at("pose");
      const Vec3 t = vec3_from_json(jp.at("translation"), "translation");
      const auto& jr = jp.at("rotation");
      if (!jr.is_array() || jr.size() != 4)
        throw Error(ErrorKind::parse, "rotation must be [w,x,y,z]");
      f.pose = make_pose(t,
                         Quat{jr[0].get<double>(), jr[1].get<double>(),
                              jr[2].get<double>(), jr[3].get<double>()},
                         f.timestamp_us);
      f.keyframe = jf.at("keyframe").get<bool>();
      if (jf.contains("annotation_path") && !jf.at("annotation_path").is_null())
        f.annotation_path =
            (base / jf.at("annotation_path").get<std::string>()).string();
      if (jf.contains("static_label_path") &&
          !jf.at("static_label_path").is_null())
        f.static_label_path =
            (base / jf.at("static_label_path").get<std::string>()).string();
      clip.frames.push_back(std::move(f));
    }
  } catch (const ordered_json::exception& e) {
    throw Error(ErrorKind::parse,
                manifest_path.string() + ": " + std::string(e.what()));
  }

  for (std::size_t i = 1; i < clip.frames.size(); ++i)
    if (clip.frames[i].timestamp_us <= clip.frames[i - 1].timestamp_us)
      throw Error(ErrorKind::non_monotonic_timestamps,
                  "frame timestamps must be strictly increasing");
  for (const auto& f : clip.frames) {
    if (f.keyframe && !f.annotation_path)
      throw Error(ErrorKind::keyframe_missing_annotation,
                  "keyframe at " + std::to_string(f.timestamp_us) +
                      " has no annotation_path");
    if (!f.keyframe && f.annotation_path)
      throw Error(ErrorKind::parse,
                  "non-keyframe at " + std::to_string(f.timestamp_us) +
                      " must not reference an annotation");
    if (!std::filesystem::exists(f.lidar_path))
      throw Error(ErrorKind::io, "lidar file missing: " + f.lidar_path);
    if (f.annotation_path && !std::filesystem::exists(*f.annotation_path))
      throw Error(ErrorKind::io,
                  "annotation file missing: " + *f.annotation_path);
    if (f.static_label_path && !std::filesystem::exists(*f.static_label_path))
      throw Error(ErrorKind::io,
                  "static label file missing: " + *f.static_label_path);
  }
  return clip;
}

void write_clip(const std::filesystem::path& manifest_path,
                const ClipManifest& clip) {
  ordered_json j;
  j["clip_id"] = clip.clip_id;
  j["classes"] = clip.classes;
  j["frames"] = ordered_json::array();
  for (const auto& f : clip.frames) {
    ordered_json jf;
    jf["timestamp_us"] = f.timestamp_us;
    jf["lidar_path"] = f.lidar_path;
    jf["radar_paths"] = f.radar_paths;
    jf["pose"] = {
        {"translation",
         {f.pose.translation.x, f.pose.translation.y, f.pose.translation.z}},
        {"rotation",
         {f.pose.rotation.w, f.pose.rotation.x, f.pose.rotation.y,
          f.pose.rotation.z}}};
    jf["keyframe"] = f.keyframe;
    if (f.annotation_path) jf["annotation_path"] = *f.annotation_path;
    if (f.static_label_path) jf["static_label_path"] = *f.static_label_path;
    j["frames"].push_back(std::move(jf));
  }
  atomic_write_text(manifest_path, j.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Annotations

std::vector<AnnotationFrame> read_annotations(
    const std::filesystem::path& path) {
  ordered_json j = parse_json_file(path);
  // A single frame object is accepted as shorthand for a one-element array.
  if (j.is_object()) {
    ordered_json arr = ordered_json::array();
    arr.push_back(std::move(j));
    j = std::move(arr);
  }
  if (!j.is_array())
    throw Error(ErrorKind::parse, path.string() + ": expected array of frames");
  std::vector<AnnotationFrame> frames;
  try {
    for (const auto& jf : j) {
      AnnotationFrame frame;
      frame.timestamp_us = jf.at("timestamp_us").get<std::int64_t>();
      for (const auto& jb : jf.at("boxes")) {
        Box3D b;
        b.center = vec3_from_json(jb.at("center"), "center");
        b.size = vec3_from_json(jb.at("size"), "size");
        b.yaw = jb.at("yaw").get<double>();
        const auto& jv = jb.at("velocity");
        if (!jv.is_array() || jv.size() != 2)
          throw Error(ErrorKind::parse, "velocity must be [vx,vy]");
        b.vx = jv[0].get<double>();
        b.vy = jv[1].get<double>();
        b.class_id = class_code(jb.at("class").get<std::string>());
        if (jb.contains("track_id") && !jb.at("track_id").is_null()) {
          const auto id = jb.at("track_id").get<std::int64_t>();
          if (id < 0)
            throw Error(ErrorKind::invalid_box, "track_id must be >= 0");
          b.track_id = id;
        }
        if (jb.contains("score") && !jb.at("score").is_null()) {
          const double s = jb.at("score").get<double>();
          if (!(s >= 0.0 && s <= 1.0))
            throw Error(ErrorKind::invalid_box, "score must be in [0,1]");
          b.score = s;
        }
        frame.boxes.push_back(make_box(b));
      }
      frames.push_back(std::move(frame));
    }
  } catch (const ordered_json::exception& e) {
    throw Error(ErrorKind::parse, path.string() + ": " + std::string(e.what()));
  }
  return frames;
}

void write_annotations(const std::filesystem::path& path,
                       const std::vector<AnnotationFrame>& frames) {
  ordered_json arr = ordered_json::array();
  for (const auto& frame : frames) {
    ordered_json jf;
    jf["timestamp_us"] = frame.timestamp_us;
    jf["boxes"] = ordered_json::array();
    for (const auto& b : frame.boxes) {
      ordered_json jb;
      if (b.track_id) jb["track_id"] = *b.track_id;
      jb["class"] = std::string(class_name(b.class_id));
      jb["center"] = {b.center.x, b.center.y, b.center.z};
      jb["size"] = {b.size.x, b.size.y, b.size.z};
      jb["yaw"] = b.yaw;
      jb["velocity"] = {b.vx, b.vy};
      if (b.score) jb["score"] = *b.score;
      jf["boxes"].push_back(std::move(jb));
    }
    arr.push_back(std::move(jf));
  }
  atomic_write_text(path, arr.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Voxel grids

void write_voxel_grid(const std::filesystem::path& path,
                      const VoxelGrid& grid) {
  const std::uint64_t cells = static_cast<std::uint64_t>(grid.dims[0]) *
                              grid.dims[1] * grid.dims[2];
  if (cells > (1ull << 31))
    throw Error(ErrorKind::out_of_range, "grid dims product exceeds 2^31");
  if (grid.labels.size() != cells)
    throw Error(ErrorKind::size_mismatch,
                "label buffer does not match dims product");
  for (std::uint8_t code : grid.labels)
    if (!is_valid_label(code))
      throw Error(ErrorKind::invalid_label,
                  "label code outside table: " + std::to_string(code));
  std::string out;
  out.reserve(kVoxelGridHeaderBytes + grid.labels.size());
  out += "OGRD";
  put_u32(out, 1u);
  put_f64(out, grid.origin.x);
  put_f64(out, grid.origin.y);
  put_f64(out, grid.origin.z);
  put_f64(out, grid.voxel_size);
  put_u32(out, grid.dims[0]);
  put_u32(out, grid.dims[1]);
  put_u32(out, grid.dims[2]);
  out.append(reinterpret_cast<const char*>(grid.labels.data()),
             grid.labels.size());
  atomic_write_bytes(path, out);
}

VoxelGrid read_voxel_grid(const std::filesystem::path& path) {
  const std::string bytes = read_file_bytes(path);
  if (bytes.size() < kVoxelGridHeaderBytes)
    throw Error(ErrorKind::size_mismatch,
                path.string() + ": truncated grid header");
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  if (std::memcmp(p, "OGRD", 4) != 0)
    throw Error(ErrorKind::bad_magic, path.string() + ": bad magic");
  const std::uint32_t version = get_u32(p + 4);
  if (version != 1)
    throw Error(ErrorKind::bad_version,
                path.string() + ": unsupported version " +
                    std::to_string(version));
  VoxelGrid grid;
  grid.origin = {get_f64(p + 8), get_f64(p + 16), get_f64(p + 24)};
  grid.voxel_size = get_f64(p + 32);
  grid.dims = {get_u32(p + 40), get_u32(p + 44), get_u32(p + 48)};
  const std::uint64_t cells = static_cast<std::uint64_t>(grid.dims[0]) *
                              grid.dims[1] * grid.dims[2];
  if (cells > (1ull << 31))
    throw Error(ErrorKind::out_of_range, "grid dims product exceeds 2^31");
  if (bytes.size() != kVoxelGridHeaderBytes + cells)
    throw Error(ErrorKind::size_mismatch,
                path.string() + ": expected " +
                    std::to_string(kVoxelGridHeaderBytes + cells) +
                    " bytes, got " + std::to_string(bytes.size()));
  grid.labels.assign(p + kVoxelGridHeaderBytes, p + bytes.size());
  for (std::uint8_t code : grid.labels)
    if (!is_valid_label(code))
      throw Error(ErrorKind::invalid_label,
                  path.string() + ": label code outside table: " +
                      std::to_string(code));
  return grid;
}

// ---------------------------------------------------------------------------
// Static label files

std::vector<std::uint8_t> read_label_file(const std::filesystem::path& path,
                                          std::size_t expected_count) {
  const std::string bytes = read_file_bytes(path);
  if (bytes.size() != expected_count)
    throw Error(ErrorKind::size_mismatch,
                path.string() + ": expected " + std::to_string(expected_count) +
                    " labels, got " + std::to_string(bytes.size()));
  std::vector<std::uint8_t> labels(bytes.begin(), bytes.end());
  for (std::uint8_t code : labels)
    if (!is_valid_label(code))
      throw Error(ErrorKind::invalid_label,
                  path.string() + ": label code outside table: " +
                      std::to_string(code));
  return labels;
}

std::vector<std::uint8_t> read_label_file(const std::filesystem::path& path) {
  const std::string bytes = read_file_bytes(path);
  return read_label_file(path, bytes.size());
}

void write_label_file(const std::filesystem::path& path,
                      const std::vector<std::uint8_t>& labels) {
  std::string bytes;
  bytes.assign(labels.begin(), labels.end());
  atomic_write_bytes(path, bytes);
}

FrameBoxes load_clip_annotations(const ClipManifest& clip) {
  FrameBoxes out;
  for (const FrameEntry& frame : clip.frames) {
    if (!frame.keyframe) continue;
    for (const AnnotationFrame& ann : read_annotations(*frame.annotation_path))
      if (ann.timestamp_us == frame.timestamp_us)
        out[ann.timestamp_us] = ann.boxes;
  }
  return out;
}

std::map<std::int64_t, std::vector<std::uint8_t>> load_clip_static_labels(
    const ClipManifest& clip, const std::filesystem::path& labels_dir) {
  std::map<std::int64_t, std::vector<std::uint8_t>> out;
  for (const std::size_t ki : clip.keyframe_indices()) {
    const FrameEntry& frame = clip.frames[ki];
    std::filesystem::path path;
    if (!labels_dir.empty())
      path = labels_dir / (std::to_string(frame.timestamp_us) + ".labels");
    else if (frame.static_label_path)
      path = *frame.static_label_path;
    else
      throw Error(ErrorKind::missing_labels,
                  "no static labels for keyframe " +
                      std::to_string(frame.timestamp_us));
    if (!std::filesystem::exists(path))
      throw Error(ErrorKind::missing_labels,
                  "static label file missing: " + path.string());
    out[frame.timestamp_us] = read_label_file(path);
  }
  return out;
}

}  // namespace gtforge
