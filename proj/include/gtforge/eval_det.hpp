#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "gtforge/scene_io.hpp"
#include "gtforge/types.hpp"

namespace gtforge {

struct EvalConfig {
  std::vector<double> dist_thresholds{1.0, 2.0, 3.0, 4.0};
  double tp_threshold = 3.0;  // m, for the TP error metrics
  double min_recall = 0.1;
  double min_precision = 0.1;
  double eval_range_x = 60.0;  // |x| bound, m
  double eval_range_y = 40.0;  // |y| bound, m
  std::vector<std::uint8_t> classes{kClassCar, kClassLargeVehicle, kClassRider,
                                    kClassPedestrian};

  void validate() const;
};

struct MatchResult {
  struct Pair {
    std::size_t pred_index = 0;
    std::size_t gt_index = 0;
    double distance = 0.0;
  };
  std::vector<Pair> matches;
  std::vector<std::size_t> unmatched_preds;
  std::vector<std::size_t> unmatched_gts;
};

/// Greedy one-to-one matching: predictions in descending score (ties by
/// lower center x, then y), each taking the nearest unmatched ground truth
/// within the BEV distance threshold.
MatchResult match_frame(std::span<const Box3D> predictions,
                        std::span<const Box3D> ground_truths, double threshold);

/// One prediction of a class across all frames, in descending-score order.
struct PredRecord {
  double score = 1.0;
  bool matched = false;
};

/// Area under the 101-point interpolated precision/recall curve, keeping
/// only samples with recall > min_recall and precision above min_precision.
/// Throws Error(no_ground_truth) when gt_count is zero; evaluate skips and
/// records such classes instead of calling this.
double class_ap(std::span<const PredRecord> score_sorted, std::size_t gt_count,
                const EvalConfig& config);

/// Per-match errors of one class at the TP threshold, descending score.
struct TpMatch {
  double score = 1.0;
  double ate = 0.0;
  double ase = 0.0;
  double aoe = 0.0;
  double ave = 0.0;
};

struct TpErrors {
  double ate = 1.0;
  double ase = 1.0;
  double aoe = 1.0;
  double ave = 1.0;
};

/// Cumulative means sampled on the 101-point recall axis between min_recall
/// and the achieved max recall; 1.0 penalty when recall never exceeds
/// min_recall.
TpErrors tp_errors(std::span<const TpMatch> score_sorted_matches,
                   std::size_t gt_count, const EvalConfig& config);

/// Scale error 1 - IoU after aligning center and orientation.
double aligned_scale_error(const Box3D& pred, const Box3D& gt);

/// ODS = 1/8 * [4*mAP + sum(1 - min(1, mTP))].
double ods(double map, double mate, double mase, double maoe, double mave);

struct ClassSummary {
  std::map<double, double> ap_per_threshold;
  double ap = 0.0;  // mean over thresholds
  TpErrors errors;
  std::size_t gt_count = 0;
  // 101 interpolated precisions per threshold, recall grid 0.00..1.00
  std::map<double, std::vector<double>> pr_curves;
};

struct DetectionSummary {
  std::map<std::uint8_t, ClassSummary> per_class;
  std::vector<std::uint8_t> skipped_classes;  // no ground truth
  double map = 0.0;
  double mate = 0.0;
  double mase = 0.0;
  double maoe = 0.0;
  double mave = 0.0;
  double ods_score = 0.0;
};

/// Full protocol over matched GT/prediction frame sets.
DetectionSummary evaluate_detections(const std::vector<AnnotationFrame>& gt,
                                     const std::vector<AnnotationFrame>& pred,
                                     const EvalConfig& config = {});

/// Deterministic machine-readable report with every summary field plus the
/// PR curves.
std::string detection_report(const DetectionSummary& summary,
                             const EvalConfig& config);

}  // namespace gtforge
