#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace gtforge {

// ---------------------------------------------------------------------------
// Errors

enum class ErrorKind {
  io,
  parse,
  size_mismatch,
  non_finite,
  bad_magic,
  bad_version,
  invalid_label,
  non_monotonic_timestamps,
  keyframe_missing_annotation,
  invalid_box,
  out_of_range,
  track_mismatch,
  empty_track,
  too_few_points,
  no_correspondences,
  empty_cloud,
  missing_keyframes,
  no_ground_found,
  no_ground_truth,
  unknown_label_name,
  label_length_mismatch,
  missing_aggregate,
  missing_labels,
  grid_shape_mismatch,
  frame_set_mismatch,
  invalid_spec,
};

enum class ErrorCategory { io_format, validation };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

  ErrorCategory category() const {
    switch (kind_) {
      case ErrorKind::io:
      case ErrorKind::parse:
      case ErrorKind::size_mismatch:
      case ErrorKind::non_finite:
      case ErrorKind::bad_magic:
      case ErrorKind::bad_version:
      case ErrorKind::invalid_label:
        return ErrorCategory::io_format;
      default:
        return ErrorCategory::validation;
    }
  }

 private:
  ErrorKind kind_;
};

// ---------------------------------------------------------------------------
// Small vector / quaternion value types

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  bool operator==(const Vec3& o) const = default;
};

inline double dot(const Vec3& a, const Vec3& b) {
  return a.x * b.x + a.y * b.y + a.z * b.z;
}

inline Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

double norm(const Vec3& a);

// Squared Euclidean distance. Every nearest-neighbor comparison in the
// library goes through this one definition so that tie detection is exact.
inline double dist_sq(const Vec3& a, const Vec3& b) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  const double dz = a.z - b.z;
  return dx * dx + dy * dy + dz * dz;
}

// Unit quaternion, scalar-first.
struct Quat {
  double w = 1.0;
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
};

Quat normalized(const Quat& q);
Quat quat_multiply(const Quat& a, const Quat& b);
Quat quat_conjugate(const Quat& q);
Vec3 quat_rotate(const Quat& q, const Vec3& v);
Quat quat_from_yaw(double yaw);
/// Heading of the rotated x-axis, in radians.
double quat_yaw(const Quat& q);
/// Rotation angle in [0, pi].
double quat_angle(const Quat& q);

// ---------------------------------------------------------------------------
// Pose: SE(3) rigid transform with timestamp.

struct Pose {
  Vec3 translation;
  Quat rotation;
  std::int64_t timestamp_us = 0;
};

Pose make_pose(const Vec3& translation, const Quat& rotation,
               std::int64_t timestamp_us = 0);

// ---------------------------------------------------------------------------
// Semantic label codes

inline constexpr std::uint8_t kLabelIgnore = 254;
inline constexpr std::uint8_t kLabelFree = 255;
inline constexpr std::size_t kNumClasses = 11;

inline constexpr std::array<std::string_view, kNumClasses> kClassNames = {
    "car",          "pedestrian",    "rider",             "large_vehicle",
    "cycle",        "road_obstacle", "traffic_fence",     "driveable_surface",
    "sidewalk",     "vegetation",    "manmade"};

inline constexpr std::uint8_t kClassCar = 0;
inline constexpr std::uint8_t kClassPedestrian = 1;
inline constexpr std::uint8_t kClassRider = 2;
inline constexpr std::uint8_t kClassLargeVehicle = 3;
inline constexpr std::uint8_t kClassDriveableSurface = 7;

/// Throws Error(unknown_label_name) for names outside the code table.
std::uint8_t class_code(std::string_view name);
std::string_view class_name(std::uint8_t code);
bool is_valid_label(std::uint8_t code);

// ---------------------------------------------------------------------------
// Box3D: oriented box with yaw-only rotation.

struct Box3D {
  Vec3 center;
  Vec3 size;  // length, width, height
  double yaw = 0.0;
  double vx = 0.0;
  double vy = 0.0;
  std::uint8_t class_id = 0;
  std::optional<std::int64_t> track_id;  // absent for predictions
  std::optional<double> score;           // absent for ground truth
};

/// Validates sizes and normalizes yaw into (-pi, pi].
Box3D make_box(const Box3D& b);

// ---------------------------------------------------------------------------
// PointCloud: columnar point set with per-kind attributes.

enum class CloudKind { plain, lidar, radar };

struct PointCloud {
  CloudKind kind = CloudKind::plain;
  std::vector<Vec3> positions;

  // lidar attributes
  std::vector<float> intensity;
  std::vector<std::uint32_t> ring;
  std::vector<double> point_time_s;

  // radar attributes
  std::vector<float> power;
  std::vector<float> snr;
  std::vector<float> v_xr;
  std::vector<float> v_yr;
  std::vector<float> t_diff;

  // optional per-point semantic codes; empty means absent
  std::vector<std::uint8_t> labels;

  std::size_t count() const { return positions.size(); }
  bool has_labels() const { return !labels.empty(); }

  /// Checks column lengths against count and positions for NaN/Inf.
  void validate() const;
};

/// Keeps rows where mask is true; attributes and labels follow.
PointCloud filter_cloud(const PointCloud& cloud, const std::vector<bool>& mask);
/// Keeps the given rows, in the given order.
PointCloud subset_cloud(const PointCloud& cloud,
                        const std::vector<std::size_t>& indices);
/// Appends b's rows onto a. Attribute columns must be compatible.
void append_cloud(PointCloud& a, const PointCloud& b);

}  // namespace gtforge
