#pragma once

#include <vector>

#include "gtforge/types.hpp"

namespace gtforge {

inline constexpr double kPi = 3.141592653589793238462643383279502884;

/// Wraps an angle into (-pi, pi].
double normalize_angle(double a);

/// Signed shortest-arc difference a - b, in (-pi, pi].
double angle_diff(double a, double b);

/// |shortest arc between a and b|, in [0, pi].
double abs_angle_diff(double a, double b);

/// a then b is NOT the order: compose(a, b) maps x -> a(b(x)).
Pose compose(const Pose& a, const Pose& b);

Pose invert_pose(const Pose& p);

Vec3 apply_pose(const Pose& p, const Vec3& v);

/// Rigid map of all positions; attributes and labels carried unchanged.
PointCloud transform_cloud(const Pose& pose, const PointCloud& cloud);

/// Maps a yaw-only box through a rigid transform. The new yaw is the heading
/// of the rotated heading vector, so the result stays yaw-only even when the
/// pose carries roll/pitch. BEV velocity is rotated the same way.
Box3D transform_box(const Pose& pose, const Box3D& box);

/// mask[i] true iff point i, expressed in the box frame, satisfies
/// |x| <= l/2, |y| <= w/2, |z| <= h/2. Boundary points are inside.
std::vector<bool> points_in_box(const PointCloud& cloud, const Box3D& box);

/// Euclidean distance between centers in the BEV plane; z ignored.
double bev_center_distance(const Box3D& a, const Box3D& b);

}  // namespace gtforge
