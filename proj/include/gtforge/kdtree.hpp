#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

#include "gtforge/types.hpp"

namespace gtforge {

// 3D kd-tree over an externally owned point array. Queries are deterministic:
// equidistant candidates resolve to the lowest point index, which requires
// visiting subtrees whose slab distance equals the current best.
class KdTree {
 public:
  struct Hit {
    std::size_t index = 0;
    double dist_sq = std::numeric_limits<double>::infinity();
  };

  KdTree() = default;

  explicit KdTree(const std::vector<Vec3>& points) : points_(&points) {
    order_.resize(points.size());
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    if (!order_.empty()) build(0, order_.size(), 0);
  }

  bool empty() const { return order_.empty(); }

  Hit nearest(const Vec3& q) const {
    Hit best;
    if (!order_.empty()) nearest_rec(0, order_.size(), 0, q, best);
    return best;
  }

  /// Indices of points with distance <= r, ascending.
  std::vector<std::size_t> radius_indices(const Vec3& q, double r) const {
    return radius_sq_indices(q, r * r);
  }

  /// Same, with the squared radius given exactly (keeps ties at the radius
  /// from being lost to sqrt rounding).
  std::vector<std::size_t> radius_sq_indices(const Vec3& q, double r_sq) const {
    std::vector<std::size_t> out;
    if (!order_.empty()) radius_rec(0, order_.size(), 0, q, r_sq, out);
    std::sort(out.begin(), out.end());
    return out;
  }

  /// Counts points with distance <= r, stopping once `stop_after` are found.
  std::size_t count_within(const Vec3& q, double r,
                           std::size_t stop_after) const {
    std::size_t count = 0;
    if (!order_.empty() && stop_after > 0)
      count_rec(0, order_.size(), 0, q, r * r, stop_after, count);
    return count;
  }

 private:
  static double axis_value(const Vec3& p, int axis) {
    return axis == 0 ? p.x : (axis == 1 ? p.y : p.z);
  }

  const Vec3& pt(std::size_t slot) const { return (*points_)[order_[slot]]; }

  void build(std::size_t lo, std::size_t hi, int axis) {
    if (hi - lo <= 1) return;
    const std::size_t mid = lo + (hi - lo) / 2;
    // (coordinate, index) ordering keeps the layout deterministic under ties.
    std::nth_element(order_.begin() + lo, order_.begin() + mid,
                     order_.begin() + hi,
                     [this, axis](std::size_t a, std::size_t b) {
                       const double va = axis_value((*points_)[a], axis);
                       const double vb = axis_value((*points_)[b], axis);
                       if (va != vb) return va < vb;
                       return a < b;
                     });
    const int next = (axis + 1) % 3;
    build(lo, mid, next);
    build(mid + 1, hi, next);
  }

  void nearest_rec(std::size_t lo, std::size_t hi, int axis, const Vec3& q,
                   Hit& best) const {
    if (lo >= hi) return;
    const std::size_t mid = lo + (hi - lo) / 2;
    const std::size_t idx = order_[mid];
    const double d = dist_sq((*points_)[idx], q);
    if (d < best.dist_sq || (d == best.dist_sq && idx < best.index)) {
      best.dist_sq = d;
      best.index = idx;
    }
    const double delta = axis_value(q, axis) - axis_value((*points_)[idx], axis);
    const int next = (axis + 1) % 3;
    if (delta <= 0.0) {
      nearest_rec(lo, mid, next, q, best);
      if (delta * delta <= best.dist_sq) nearest_rec(mid + 1, hi, next, q, best);
    } else {
      nearest_rec(mid + 1, hi, next, q, best);
      if (delta * delta <= best.dist_sq) nearest_rec(lo, mid, next, q, best);
    }
  }

  void radius_rec(std::size_t lo, std::size_t hi, int axis, const Vec3& q,
                  double r_sq, std::vector<std::size_t>& out) const {
    if (lo >= hi) return;
    const std::size_t mid = lo + (hi - lo) / 2;
    const std::size_t idx = order_[mid];
    if (dist_sq((*points_)[idx], q) <= r_sq) out.push_back(idx);
    const double delta = axis_value(q, axis) - axis_value((*points_)[idx], axis);
    const int next = (axis + 1) % 3;
    if (delta <= 0.0) {
      radius_rec(lo, mid, next, q, r_sq, out);
      if (delta * delta <= r_sq) radius_rec(mid + 1, hi, next, q, r_sq, out);
    } else {
      radius_rec(mid + 1, hi, next, q, r_sq, out);
      if (delta * delta <= r_sq) radius_rec(lo, mid, next, q, r_sq, out);
    }
  }

  void count_rec(std::size_t lo, std::size_t hi, int axis, const Vec3& q,
                 double r_sq, std::size_t stop_after, std::size_t& count) const {
    if (lo >= hi || count >= stop_after) return;
    const std::size_t mid = lo + (hi - lo) / 2;
    const std::size_t idx = order_[mid];
    if (dist_sq((*points_)[idx], q) <= r_sq) ++count;
    const double delta = axis_value(q, axis) - axis_value((*points_)[idx], axis);
    const int next = (axis + 1) % 3;
    if (delta <= 0.0) {
      count_rec(lo, mid, next, q, r_sq, stop_after, count);
      if (count < stop_after && delta * delta <= r_sq)
        count_rec(mid + 1, hi, next, q, r_sq, stop_after, count);
    } else {
      count_rec(mid + 1, hi, next, q, r_sq, stop_after, count);
      if (count < stop_after && delta * delta <= r_sq)
        count_rec(lo, mid, next, q, r_sq, stop_after, count);
    }
  }

  const std::vector<Vec3>* points_ = nullptr;
  std::vector<std::size_t> order_;
};

}  // namespace gtforge
