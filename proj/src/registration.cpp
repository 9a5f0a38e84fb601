#include "gtforge/registration.hpp"

#include <cmath>

#include <Eigen/Dense>

#include "gtforge/geometry.hpp"
#include "gtforge/kdtree.hpp"

namespace gtforge {

namespace {

// Least-squares rigid transform (Kabsch) mapping src[i] onto dst[i].
Pose solve_rigid(const std::vector<Vec3>& src, const std::vector<Vec3>& dst) {
  const std::size_t n = src.size();
  Eigen::Vector3d src_mean = Eigen::Vector3d::Zero();
  Eigen::Vector3d dst_mean = Eigen::Vector3d::Zero();
  for (std::size_t i = 0; i < n; ++i) {
    src_mean += Eigen::Vector3d(src[i].x, src[i].y, src[i].z);
    dst_mean += Eigen::Vector3d(dst[i].x, dst[i].y, dst[i].z);
  }
  src_mean /= static_cast<double>(n);
  dst_mean /= static_cast<double>(n);

  Eigen::Matrix3d h = Eigen::Matrix3d::Zero();
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::Vector3d a =
        Eigen::Vector3d(src[i].x, src[i].y, src[i].z) - src_mean;
    const Eigen::Vector3d b =
        Eigen::Vector3d(dst[i].x, dst[i].y, dst[i].z) - dst_mean;
    h += a * b.transpose();
  }

  Eigen::JacobiSVD<Eigen::Matrix3d> svd(
      h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d r = svd.matrixV() * svd.matrixU().transpose();
  if (r.determinant() < 0.0) {
    Eigen::Matrix3d v = svd.matrixV();
    v.col(2) *= -1.0;
    r = v * svd.matrixU().transpose();
  }
  const Eigen::Vector3d t = dst_mean - r * src_mean;

  const Eigen::Quaterniond q(r);
  return make_pose({t.x(), t.y(), t.z()}, {q.w(), q.x(), q.y(), q.z()});
}

std::vector<Vec3> strided_positions(const PointCloud& cloud,
                                    std::size_t max_points) {
  const std::size_t n = cloud.count();
  if (n <= max_points) return cloud.positions;
  const std::size_t stride = (n + max_points - 1) / max_points;
  std::vector<Vec3> out;
  out.reserve(n / stride + 1);
  for (std::size_t i = 0; i < n; i += stride) out.push_back(cloud.positions[i]);
  return out;
}

}  // namespace

void IcpParams::validate() const {
  if (max_iterations <= 0 || max_correspondence_dist <= 0.0 ||
      convergence_eps <= 0.0 || inlier_threshold <= 0.0 ||
      max_source_points == 0)
    throw Error(ErrorKind::invalid_spec, "ICP parameters must be positive");
}

IcpResult icp_align(const PointCloud& source, const PointCloud& target,
                    const IcpParams& params, const Pose& initial) {
  params.validate();
  if (source.count() < 3 || target.count() < 3)
    throw Error(ErrorKind::too_few_points,
                "ICP needs at least 3 points on each side");

  const std::vector<Vec3> src = strided_positions(source, params.max_source_points);
  const KdTree tree(target.positions);
  const double max_dist_sq =
      params.max_correspondence_dist * params.max_correspondence_dist;

  Pose transform = initial;
  IcpResult result;
  double prev_rms = std::numeric_limits<double>::infinity();

  std::vector<Vec3> matched_src;
  std::vector<Vec3> matched_dst;
  for (int iter = 0; iter < params.max_iterations; ++iter) {
    matched_src.clear();
    matched_dst.clear();
    for (const Vec3& p : src) {
      const Vec3 moved = apply_pose(transform, p);
      const KdTree::Hit hit = tree.nearest(moved);
      if (hit.dist_sq <= max_dist_sq) {
        matched_src.push_back(p);
        matched_dst.push_back(target.positions[hit.index]);
      }
    }
    if (matched_src.empty())
      throw Error(ErrorKind::no_correspondences,
                  "no point pair within max_correspondence_dist");
    if (matched_src.size() >= 3) transform = solve_rigid(matched_src, matched_dst);

    double sum_sq = 0.0;
    for (std::size_t i = 0; i < matched_src.size(); ++i)
      sum_sq += dist_sq(apply_pose(transform, matched_src[i]), matched_dst[i]);
    const double rms = std::sqrt(sum_sq / static_cast<double>(matched_src.size()));

    result.rms_history.push_back(rms);
    result.iterations = iter + 1;
    result.rms = rms;
    if (std::abs(prev_rms - rms) < params.convergence_eps) {
      result.converged = true;
      break;
    }
    prev_rms = rms;
  }

  result.transform = transform;
  result.confidence =
      registration_confidence(source, target, transform, params.inlier_threshold);
  return result;
}

double registration_confidence(const PointCloud& source,
                               const PointCloud& target, const Pose& transform,
                               double inlier_threshold) {
  if (source.count() == 0 || target.count() == 0)
    throw Error(ErrorKind::empty_cloud,
                "confidence needs nonempty source and target");
  const KdTree tree(target.positions);
  const double thresh_sq = inlier_threshold * inlier_threshold;
  std::size_t inliers = 0;
  for (const Vec3& p : source.positions) {
    const Vec3 moved = apply_pose(transform, p);
    if (tree.nearest(moved).dist_sq <= thresh_sq) ++inliers;
  }
  return static_cast<double>(inliers) / static_cast<double>(source.count());
}

}  // namespace gtforge
