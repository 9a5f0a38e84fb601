#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "gtforge/scene_io.hpp"
#include "gtforge/types.hpp"

namespace gtforge {

struct ConfusionCounts {
  std::array<std::uint64_t, kNumClasses> tp{};
  std::array<std::uint64_t, kNumClasses> fp{};
  std::array<std::uint64_t, kNumClasses> fn{};
  std::uint64_t occ_tp = 0;
  std::uint64_t occ_fp = 0;
  std::uint64_t occ_fn = 0;
  std::uint64_t evaluated_voxels = 0;
  // prediction voxels carrying the GT-only ignore code, treated as free
  std::uint64_t pred_ignore_voxels = 0;

  ConfusionCounts& operator+=(const ConfusionCounts& o);
};

/// Voxelwise confusion with GT-ignore voxels excluded entirely. Binary
/// occupancy treats any semantic code as occupied and free as empty.
ConfusionCounts confusion(const VoxelGrid& pred, const VoxelGrid& gt);

struct OccMetrics {
  std::array<double, kNumClasses> iou{};   // valid where denominator > 0
  std::array<bool, kNumClasses> in_mean{};
  double miou = 0.0;
  double sc_iou = 0.0;
};

/// Per-class IoU, mIoU over classes present in GT (strict mode averages all
/// 11 classes, counting absent ones as zero), and scene-completion IoU.
OccMetrics occ_metrics(const ConfusionCounts& counts, bool strict_miou = false);

std::string occupancy_report(const ConfusionCounts& counts,
                             const OccMetrics& metrics, std::size_t grid_pairs,
                             bool strict_miou);

}  // namespace gtforge
