#include "gtforge/geometry.hpp"

#include <cmath>

namespace gtforge {

double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }

Quat normalized(const Quat& q) {
  const double n = std::sqrt(q.w * q.w + q.x * q.x + q.y * q.y + q.z * q.z);
  if (n <= 0.0 || !std::isfinite(n))
    throw Error(ErrorKind::non_finite, "quaternion has zero or non-finite norm");
  return {q.w / n, q.x / n, q.y / n, q.z / n};
}

Quat quat_multiply(const Quat& a, const Quat& b) {
  return {a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
          a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
          a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
          a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w};
}

Quat quat_conjugate(const Quat& q) { return {q.w, -q.x, -q.y, -q.z}; }

Vec3 quat_rotate(const Quat& q, const Vec3& v) {
  // v' = v + 2*w*(u x v) + 2*(u x (u x v)) with u = (x,y,z)
  const Vec3 u{q.x, q.y, q.z};
  const Vec3 uv = cross(u, v);
  const Vec3 uuv = cross(u, uv);
  return v + uv * (2.0 * q.w) + uuv * 2.0;
}

Quat quat_from_yaw(double yaw) {
  return {std::cos(yaw * 0.5), 0.0, 0.0, std::sin(yaw * 0.5)};
}

double quat_yaw(const Quat& q) {
  const Vec3 h = quat_rotate(q, Vec3{1.0, 0.0, 0.0});
  return std::atan2(h.y, h.x);
}

double quat_angle(const Quat& q) {
  // atan2 keeps full precision near the identity, unlike acos
  const double s = std::sqrt(q.x * q.x + q.y * q.y + q.z * q.z);
  return 2.0 * std::atan2(s, std::abs(q.w));
}

Pose make_pose(const Vec3& translation, const Quat& rotation,
               std::int64_t timestamp_us) {
  return Pose{translation, normalized(rotation), timestamp_us};
}

double normalize_angle(double a) {
  a = std::fmod(a, 2.0 * kPi);
  if (a <= -kPi)
    a += 2.0 * kPi;
  else if (a > kPi)
    a -= 2.0 * kPi;
  return a;
}

double angle_diff(double a, double b) { return normalize_angle(a - b); }

double abs_angle_diff(double a, double b) { return std::abs(angle_diff(a, b)); }

Pose compose(const Pose& a, const Pose& b) {
  Pose out;
  out.rotation = normalized(quat_multiply(a.rotation, b.rotation));
  out.translation = quat_rotate(a.rotation, b.translation) + a.translation;
  out.timestamp_us = a.timestamp_us;
  return out;
}

Pose invert_pose(const Pose& p) {
  Pose out;
  out.rotation = quat_conjugate(p.rotation);
  out.translation = quat_rotate(out.rotation, p.translation) * -1.0;
  out.timestamp_us = p.timestamp_us;
  return out;
}

Vec3 apply_pose(const Pose& p, const Vec3& v) {
  return quat_rotate(p.rotation, v) + p.translation;
}

PointCloud transform_cloud(const Pose& pose, const PointCloud& cloud) {
  PointCloud out = cloud;
  for (auto& p : out.positions) p = apply_pose(pose, p);
  return out;
}

Box3D transform_box(const Pose& pose, const Box3D& box) {
  Box3D out = box;
  out.center = apply_pose(pose, box.center);
  const Vec3 heading =
      quat_rotate(pose.rotation, {std::cos(box.yaw), std::sin(box.yaw), 0.0});
  out.yaw = std::atan2(heading.y, heading.x);
  const Vec3 vel = quat_rotate(pose.rotation, {box.vx, box.vy, 0.0});
  out.vx = vel.x;
  out.vy = vel.y;
  return out;
}

Box3D make_box(const Box3D& b) {
  if (!(b.size.x > 0.0 && b.size.y > 0.0 && b.size.z > 0.0))
    throw Error(ErrorKind::invalid_box, "box sizes must be strictly positive");
  Box3D out = b;
  out.yaw = normalize_angle(b.yaw);
  return out;
}

std::vector<bool> points_in_box(const PointCloud& cloud, const Box3D& box) {
  const double c = std::cos(-box.yaw);
  const double s = std::sin(-box.yaw);
  const double hl = box.size.x * 0.5;
  const double hw = box.size.y * 0.5;
  const double hh = box.size.z * 0.5;
  std::vector<bool> mask(cloud.count(), false);
  for (std::size_t i = 0; i < cloud.count(); ++i) {
    const Vec3 d = cloud.positions[i] - box.center;
    const double lx = c * d.x - s * d.y;
    const double ly = s * d.x + c * d.y;
    mask[i] = std::abs(lx) <= hl && std::abs(ly) <= hw && std::abs(d.z) <= hh;
  }
  return mask;
}

double bev_center_distance(const Box3D& a, const Box3D& b) {
  const double dx = a.center.x - b.center.x;
  const double dy = a.center.y - b.center.y;
  return std::sqrt(dx * dx + dy * dy);
}

}  // namespace gtforge
