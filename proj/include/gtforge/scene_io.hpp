#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gtforge/types.hpp"

namespace gtforge {

// ---------------------------------------------------------------------------
// Point-cloud binary records. All fields little-endian.
//   lidar: x,y,z,intensity f32 | ring u32 | point_time f64   (28 bytes)
//   radar: x,y,z,power,snr,v_xr,v_yr,t_diff as eight f32     (32 bytes)

inline constexpr std::size_t kLidarRecordBytes = 28;
inline constexpr std::size_t kRadarRecordBytes = 32;

PointCloud read_point_cloud(const std::filesystem::path& path, CloudKind kind);
void write_point_cloud(const std::filesystem::path& path,
                       const PointCloud& cloud);

// ---------------------------------------------------------------------------
// Clip manifest

struct FrameEntry {
  std::int64_t timestamp_us = 0;
  std::string lidar_path;  // resolved against the manifest directory
  std::vector<std::string> radar_paths;
  Pose pose;
  bool keyframe = false;
  std::optional<std::string> annotation_path;
  std::optional<std::string> static_label_path;
};

struct ClipManifest {
  std::string clip_id;
  std::vector<std::string> classes;
  std::vector<FrameEntry> frames;

  std::vector<std::size_t> keyframe_indices() const;
};

ClipManifest load_clip(const std::filesystem::path& manifest_path);
void write_clip(const std::filesystem::path& manifest_path,
                const ClipManifest& clip);

// ---------------------------------------------------------------------------
// Annotations. A file holds an array of frame records:
//   [{"timestamp_us": int, "boxes": [{"track_id", "class", "center",
//     "size", "yaw", "velocity", "score"?}, ...]}, ...]

struct AnnotationFrame {
  std::int64_t timestamp_us = 0;
  std::vector<Box3D> boxes;
};

std::vector<AnnotationFrame> read_annotations(const std::filesystem::path& path);
void write_annotations(const std::filesystem::path& path,
                       const std::vector<AnnotationFrame>& frames);

// ---------------------------------------------------------------------------
// Voxel grid, OGRD container:
//   "OGRD" | u32 version=1 | f64 origin xyz | f64 voxel_size |
//   u32 nx,ny,nz | nx*ny*nz label bytes, index law (ix*ny + iy)*nz + iz

struct VoxelGrid {
  Vec3 origin;  // minimum corner
  double voxel_size = 0.4;
  std::array<std::uint32_t, 3> dims{0, 0, 0};
  std::vector<std::uint8_t> labels;

  std::size_t cell_count() const {
    return static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
  }
  std::size_t index(std::uint32_t ix, std::uint32_t iy, std::uint32_t iz) const {
    return (static_cast<std::size_t>(ix) * dims[1] + iy) * dims[2] + iz;
  }
  std::uint8_t at(std::uint32_t ix, std::uint32_t iy, std::uint32_t iz) const {
    return labels[index(ix, iy, iz)];
  }
  Vec3 voxel_center(std::uint32_t ix, std::uint32_t iy, std::uint32_t iz) const {
    return {origin.x + (ix + 0.5) * voxel_size,
            origin.y + (iy + 0.5) * voxel_size,
            origin.z + (iz + 0.5) * voxel_size};
  }
};

inline constexpr std::size_t kVoxelGridHeaderBytes = 52;

void write_voxel_grid(const std::filesystem::path& path, const VoxelGrid& grid);
VoxelGrid read_voxel_grid(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Static label file: one u8 code per point, same order as the companion cloud.

std::vector<std::uint8_t> read_label_file(const std::filesystem::path& path,
                                          std::size_t expected_count);
std::vector<std::uint8_t> read_label_file(const std::filesystem::path& path);
void write_label_file(const std::filesystem::path& path,
                      const std::vector<std::uint8_t>& labels);

// ---------------------------------------------------------------------------
// Clip-level loading helpers

/// timestamp_us -> boxes for that frame, ego coordinates.
using FrameBoxes = std::map<std::int64_t, std::vector<Box3D>>;

/// All keyframe annotations referenced by the manifest.
FrameBoxes load_clip_annotations(const ClipManifest& clip);

/// Static labels per keyframe: from labels_dir/<timestamp_us>.labels when a
/// directory is given, otherwise from the manifest's static_label_path.
std::map<std::int64_t, std::vector<std::uint8_t>> load_clip_static_labels(
    const ClipManifest& clip, const std::filesystem::path& labels_dir = {});

/// Writes through a temp file in the same directory, then renames.
void atomic_write_bytes(const std::filesystem::path& path,
                        const std::string& bytes);
void atomic_write_text(const std::filesystem::path& path,
                       const std::string& text);

}  // namespace gtforge
