#include "gtforge/eval_occ.hpp"

#include <nlohmann/json.hpp>

namespace gtforge {

ConfusionCounts& ConfusionCounts::operator+=(const ConfusionCounts& o) {
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    tp[c] += o.tp[c];
    fp[c] += o.fp[c];
    fn[c] += o.fn[c];
  }
  occ_tp += o.occ_tp;
  occ_fp += o.occ_fp;
  occ_fn += o.occ_fn;
  evaluated_voxels += o.evaluated_voxels;
  pred_ignore_voxels += o.pred_ignore_voxels;
  return *this;
}

ConfusionCounts confusion(const VoxelGrid& pred, const VoxelGrid& gt) {
  if (pred.dims != gt.dims || pred.voxel_size != gt.voxel_size ||
      !(pred.origin == gt.origin))
    throw Error(ErrorKind::grid_shape_mismatch,
                "prediction and ground-truth grids differ in shape");

  ConfusionCounts counts;
  for (std::size_t i = 0; i < gt.labels.size(); ++i) {
    const std::uint8_t g = gt.labels[i];
    if (g == kLabelIgnore) continue;
    std::uint8_t p = pred.labels[i];
    if (p == kLabelIgnore) {
      p = kLabelFree;  // ignore is a GT-side concept
      ++counts.pred_ignore_voxels;
    }
    ++counts.evaluated_voxels;

    if (p < kNumClasses && p == g) {
      ++counts.tp[p];
    } else {
      if (p < kNumClasses) ++counts.fp[p];
      if (g < kNumClasses) ++counts.fn[g];
    }

    const bool pred_occ = p < kNumClasses;
    const bool gt_occ = g < kNumClasses;
    if (pred_occ && gt_occ)
      ++counts.occ_tp;
    else if (pred_occ)
      ++counts.occ_fp;
    else if (gt_occ)
      ++counts.occ_fn;
  }
  return counts;
}

OccMetrics occ_metrics(const ConfusionCounts& counts, bool strict_miou) {
  OccMetrics out;
  double sum = 0.0;
  std::size_t averaged = 0;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    const std::uint64_t denom = counts.tp[c] + counts.fp[c] + counts.fn[c];
    out.iou[c] = denom > 0 ? static_cast<double>(counts.tp[c]) /
                                 static_cast<double>(denom)
                           : 0.0;
    const bool present_in_gt = counts.tp[c] + counts.fn[c] > 0;
    out.in_mean[c] = strict_miou || present_in_gt;
    if (out.in_mean[c]) {
      sum += out.iou[c];
      ++averaged;
    }
  }
  out.miou = averaged > 0 ? sum / static_cast<double>(averaged) : 0.0;

  const std::uint64_t occ_denom = counts.occ_tp + counts.occ_fp + counts.occ_fn;
  out.sc_iou = occ_denom > 0 ? static_cast<double>(counts.occ_tp) /
                                   static_cast<double>(occ_denom)
                             : 1.0;
  return out;
}

std::string occupancy_report(const ConfusionCounts& counts,
                             const OccMetrics& metrics, std::size_t grid_pairs,
                             bool strict_miou) {
  nlohmann::ordered_json j;
  j["grid_pairs"] = grid_pairs;
  j["strict_miou"] = strict_miou;
  j["SC_IoU"] = metrics.sc_iou;
  j["mIoU"] = metrics.miou;
  j["classes"] = nlohmann::ordered_json::object();
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    const std::uint64_t denom = counts.tp[c] + counts.fp[c] + counts.fn[c];
    nlohmann::ordered_json jc;
    if (denom > 0)
      jc["IoU"] = metrics.iou[c];
    else
      jc["IoU"] = nullptr;
    jc["in_mean"] = metrics.in_mean[c];
    jc["TP"] = counts.tp[c];
    jc["FP"] = counts.fp[c];
    jc["FN"] = counts.fn[c];
    j["classes"][std::string(class_name(static_cast<std::uint8_t>(c)))] =
        std::move(jc);
  }
  j["binary"] = {{"TP", counts.occ_tp},
                 {"FP", counts.occ_fp},
                 {"FN", counts.occ_fn}};
  j["evaluated_voxels"] = counts.evaluated_voxels;
  j["pred_ignore_voxels"] = counts.pred_ignore_voxels;
  return j.dump(2) + "\n";
}

}  // namespace gtforge
