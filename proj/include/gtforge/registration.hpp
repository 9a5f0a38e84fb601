#pragma once

#include <cstdint>
#include <vector>

#include "gtforge/types.hpp"

namespace gtforge {

struct IcpParams {
  int max_iterations = 50;
  double max_correspondence_dist = 1.0;  // m
  double convergence_eps = 1e-5;         // RMS change between iterations, m
  double inlier_threshold = 0.1;         // m
  // Source is thinned to at most this many points by a deterministic stride.
  std::size_t max_source_points = 20000;

  void validate() const;
};

struct IcpResult {
  Pose transform;  // source -> target
  double rms = 0.0;
  double confidence = 0.0;  // inlier fraction under inlier_threshold
  int iterations = 0;
  bool converged = false;
  std::vector<double> rms_history;  // post-solve RMS per iteration
};

/// Point-to-point ICP: nearest-neighbor correspondences within
/// max_correspondence_dist, closed-form SVD solve, repeat until the RMS
/// change drops below convergence_eps or max_iterations is reached.
/// Deterministic for fixed inputs.
IcpResult icp_align(const PointCloud& source, const PointCloud& target,
                    const IcpParams& params = {}, const Pose& initial = {});

/// Fraction of transformed source points whose nearest target point lies
/// within inlier_threshold.
double registration_confidence(const PointCloud& source,
                               const PointCloud& target, const Pose& transform,
                               double inlier_threshold);

}  // namespace gtforge
