#include "gtforge/eval_det.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "gtforge/geometry.hpp"

namespace gtforge {

void EvalConfig::validate() const {
  if (dist_thresholds.empty() ||
      !std::is_sorted(dist_thresholds.begin(), dist_thresholds.end()))
    throw Error(ErrorKind::invalid_spec,
                "distance thresholds must be sorted ascending");
  if (!(min_recall >= 0.0 && min_recall < 1.0) ||
      !(min_precision >= 0.0 && min_precision < 1.0))
    throw Error(ErrorKind::invalid_spec,
                "min_recall/min_precision must lie in [0,1)");
  if (tp_threshold <= 0.0 || eval_range_x <= 0.0 || eval_range_y <= 0.0)
    throw Error(ErrorKind::invalid_spec, "thresholds and ranges are positive");
}

// ---------------------------------------------------------------------------
// matching

namespace {

std::vector<std::size_t> score_order(std::span<const Box3D> predictions) {
  std::vector<std::size_t> order(predictions.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const Box3D& pa = predictions[a];
    const Box3D& pb = predictions[b];
    const double sa = pa.score.value_or(1.0);
    const double sb = pb.score.value_or(1.0);
    if (sa != sb) return sa > sb;
    if (pa.center.x != pb.center.x) return pa.center.x < pb.center.x;
    if (pa.center.y != pb.center.y) return pa.center.y < pb.center.y;
    return a < b;
  });
  return order;
}

}  // namespace

MatchResult match_frame(std::span<const Box3D> predictions,
                        std::span<const Box3D> ground_truths, double threshold) {
  MatchResult out;
  std::vector<bool> gt_taken(ground_truths.size(), false);
  for (const std::size_t pi : score_order(predictions)) {
    double best_dist = threshold;
    std::ptrdiff_t best_gt = -1;
    for (std::size_t gi = 0; gi < ground_truths.size(); ++gi) {
      if (gt_taken[gi]) continue;
      const double d = bev_center_distance(predictions[pi], ground_truths[gi]);
      if (d < best_dist || (d == best_dist && best_gt < 0)) {
        best_dist = d;
        best_gt = static_cast<std::ptrdiff_t>(gi);
      }
    }
    if (best_gt >= 0) {
      gt_taken[static_cast<std::size_t>(best_gt)] = true;
      out.matches.push_back(
          {pi, static_cast<std::size_t>(best_gt), best_dist});
    } else {
      out.unmatched_preds.push_back(pi);
    }
  }
  for (std::size_t gi = 0; gi < ground_truths.size(); ++gi)
    if (!gt_taken[gi]) out.unmatched_gts.push_back(gi);
  return out;
}

// ---------------------------------------------------------------------------
// PR-curve machinery shared by AP and the TP metrics

namespace {

// Piecewise-linear sample of (x, y) at query q. Left of the curve clamps to
// the first value, right of it returns `right`. Duplicate x keep the last y.
double interp_curve(const std::vector<double>& x, const std::vector<double>& y,
                    double q, double right) {
  if (x.empty()) return right;
  if (q > x.back()) return right;
  if (q <= x.front()) return y.front();
  // last index with x[i] < q
  const auto it = std::lower_bound(x.begin(), x.end(), q);
  const std::size_t hi = static_cast<std::size_t>(it - x.begin());
  if (x[hi] == q) {
    std::size_t j = hi;
    while (j + 1 < x.size() && x[j + 1] == q) ++j;
    return y[j];
  }
  const std::size_t lo = hi - 1;
  const double u = (q - x[lo]) / (x[hi] - x[lo]);
  return y[lo] + u * (y[hi] - y[lo]);
}

// Collapses duplicate recalls, keeping the last (lowest) precision.
void dedup_curve(std::vector<double>& x, std::vector<double>& y) {
  std::vector<double> ox, oy;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!ox.empty() && ox.back() == x[i])
      oy.back() = y[i];
    else {
      ox.push_back(x[i]);
      oy.push_back(y[i]);
    }
  }
  x = std::move(ox);
  y = std::move(oy);
}

std::vector<double> interpolated_precisions(std::span<const PredRecord> records,
                                            std::size_t gt_count) {
  std::vector<double> recall, precision;
  std::size_t tp = 0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].matched) ++tp;
    recall.push_back(static_cast<double>(tp) / static_cast<double>(gt_count));
    precision.push_back(static_cast<double>(tp) / static_cast<double>(i + 1));
  }
  dedup_curve(recall, precision);
  std::vector<double> out(101);
  for (int k = 0; k <= 100; ++k)
    out[k] = interp_curve(recall, precision, k / 100.0, 0.0);
  return out;
}

}  // namespace

double class_ap(std::span<const PredRecord> score_sorted, std::size_t gt_count,
                const EvalConfig& config) {
  if (gt_count == 0)
    throw Error(ErrorKind::no_ground_truth, "AP undefined without ground truth");
  const std::vector<double> prec = interpolated_precisions(score_sorted, gt_count);
  const int first = static_cast<int>(std::lround(100.0 * config.min_recall)) + 1;
  // normalize each sample before averaging; a perfect detector then
  // contributes exactly 1.0 per sample
  double sum = 0.0;
  int n = 0;
  for (int k = first; k <= 100; ++k) {
    sum += std::max(prec[k] - config.min_precision, 0.0) /
           (1.0 - config.min_precision);
    ++n;
  }
  return sum / static_cast<double>(n);
}

TpErrors tp_errors(std::span<const TpMatch> score_sorted_matches,
                   std::size_t gt_count, const EvalConfig& config) {
  TpErrors out;  // defaults to the 1.0 penalty
  if (gt_count == 0 || score_sorted_matches.empty()) return out;

  std::vector<double> recall;
  std::vector<double> cum_ate, cum_ase, cum_aoe, cum_ave;
  double s_ate = 0.0, s_ase = 0.0, s_aoe = 0.0, s_ave = 0.0;
  for (std::size_t i = 0; i < score_sorted_matches.size(); ++i) {
    const TpMatch& m = score_sorted_matches[i];
    s_ate += m.ate;
    s_ase += m.ase;
    s_aoe += m.aoe;
    s_ave += m.ave;
    const double inv = 1.0 / static_cast<double>(i + 1);
    recall.push_back(static_cast<double>(i + 1) / static_cast<double>(gt_count));
    cum_ate.push_back(s_ate * inv);
    cum_ase.push_back(s_ase * inv);
    cum_aoe.push_back(s_aoe * inv);
    cum_ave.push_back(s_ave * inv);
  }

  const double max_recall = recall.back();
  const int first = static_cast<int>(std::lround(100.0 * config.min_recall)) + 1;
  const int last = static_cast<int>(std::floor(max_recall * 100.0 + 1e-9));
  if (last < first) return out;  // recall never exceeded min_recall

  auto sampled_mean = [&](const std::vector<double>& cum) {
    double sum = 0.0;
    for (int k = first; k <= last; ++k)
      sum += interp_curve(recall, cum, k / 100.0, cum.back());
    return sum / static_cast<double>(last - first + 1);
  };
  out.ate = sampled_mean(cum_ate);
  out.ase = sampled_mean(cum_ase);
  out.aoe = sampled_mean(cum_aoe);
  out.ave = sampled_mean(cum_ave);
  return out;
}

double aligned_scale_error(const Box3D& pred, const Box3D& gt) {
  const double inter = std::min(pred.size.x, gt.size.x) *
                       std::min(pred.size.y, gt.size.y) *
                       std::min(pred.size.z, gt.size.z);
  const double vol_pred = pred.size.x * pred.size.y * pred.size.z;
  const double vol_gt = gt.size.x * gt.size.y * gt.size.z;
  return 1.0 - inter / (vol_pred + vol_gt - inter);
}

double ods(double map, double mate, double mase, double maoe, double mave) {
  double sum = 4.0 * map;
  for (const double m : {mate, mase, maoe, mave})
    sum += 1.0 - std::min(1.0, m);
  return sum / 8.0;
}

// ---------------------------------------------------------------------------
// evaluate_detections

namespace {

bool in_eval_range(const Box3D& b, const EvalConfig& config) {
  return std::abs(b.center.x) <= config.eval_range_x &&
         std::abs(b.center.y) <= config.eval_range_y;
}

std::vector<Box3D> class_boxes(const std::vector<Box3D>& boxes,
                               std::uint8_t class_id, const EvalConfig& config) {
  std::vector<Box3D> out;
  for (const Box3D& b : boxes)
    if (b.class_id == class_id && in_eval_range(b, config)) out.push_back(b);
  return out;
}

}  // namespace

DetectionSummary evaluate_detections(const std::vector<AnnotationFrame>& gt,
                                     const std::vector<AnnotationFrame>& pred,
                                     const EvalConfig& config) {
  config.validate();

  std::map<std::int64_t, const AnnotationFrame*> gt_by_ts, pred_by_ts;
  for (const auto& f : gt) gt_by_ts[f.timestamp_us] = &f;
  for (const auto& f : pred) pred_by_ts[f.timestamp_us] = &f;
  if (gt_by_ts.size() != gt.size() || pred_by_ts.size() != pred.size())
    throw Error(ErrorKind::frame_set_mismatch, "duplicate frame timestamps");
  {
    std::set<std::int64_t> gts, prs;
    for (const auto& [ts, _] : gt_by_ts) gts.insert(ts);
    for (const auto& [ts, _] : pred_by_ts) prs.insert(ts);
    if (gts != prs)
      throw Error(ErrorKind::frame_set_mismatch,
                  "ground-truth and prediction frame sets differ");
  }

  DetectionSummary summary;
  double sum_ap = 0.0, sum_ate = 0.0, sum_ase = 0.0, sum_aoe = 0.0,
         sum_ave = 0.0;
  std::size_t evaluated = 0;

  for (const std::uint8_t class_id : config.classes) {
    // Gather per-frame class boxes once.
    struct FramePair {
      std::vector<Box3D> preds;
      std::vector<Box3D> gts;
    };
    std::vector<FramePair> pairs;
    std::size_t gt_count = 0;
    for (const auto& [ts, gtf] : gt_by_ts) {
      FramePair p;
      p.gts = class_boxes(gtf->boxes, class_id, config);
      p.preds = class_boxes(pred_by_ts.at(ts)->boxes, class_id, config);
      gt_count += p.gts.size();
      pairs.push_back(std::move(p));
    }
    if (gt_count == 0) {
      summary.skipped_classes.push_back(class_id);
      continue;
    }

    ClassSummary cls;
    cls.gt_count = gt_count;

    for (const double threshold : config.dist_thresholds) {
      std::vector<std::pair<double, PredRecord>> scored;  // (score, record)
      for (const FramePair& p : pairs) {
        const MatchResult m = match_frame(p.preds, p.gts, threshold);
        for (const auto& pair : m.matches)
          scored.push_back({p.preds[pair.pred_index].score.value_or(1.0),
                            {p.preds[pair.pred_index].score.value_or(1.0), true}});
        for (const std::size_t pi : m.unmatched_preds)
          scored.push_back({p.preds[pi].score.value_or(1.0),
                            {p.preds[pi].score.value_or(1.0), false}});
      }
      std::stable_sort(scored.begin(), scored.end(),
                       [](const auto& a, const auto& b) {
                         return a.first > b.first;
                       });
      std::vector<PredRecord> records;
      records.reserve(scored.size());
      for (const auto& [s, r] : scored) records.push_back(r);

      const double ap = class_ap(records, gt_count, config);
      cls.ap_per_threshold[threshold] = ap;
      cls.pr_curves[threshold] = interpolated_precisions(records, gt_count);
      cls.ap += ap / static_cast<double>(config.dist_thresholds.size());
    }

    // TP error metrics at the dedicated threshold.
    std::vector<TpMatch> tp;
    for (const FramePair& p : pairs) {
      const MatchResult m = match_frame(p.preds, p.gts, config.tp_threshold);
      for (const auto& pair : m.matches) {
        const Box3D& pb = p.preds[pair.pred_index];
        const Box3D& gb = p.gts[pair.gt_index];
        TpMatch t;
        t.score = pb.score.value_or(1.0);
        t.ate = pair.distance;
        t.ase = aligned_scale_error(pb, gb);
        t.aoe = abs_angle_diff(pb.yaw, gb.yaw);
        t.ave = std::hypot(pb.vx - gb.vx, pb.vy - gb.vy);
        tp.push_back(t);
      }
    }
    std::stable_sort(tp.begin(), tp.end(), [](const TpMatch& a, const TpMatch& b) {
      return a.score > b.score;
    });
    cls.errors = tp_errors(tp, gt_count, config);

    sum_ap += cls.ap;
    sum_ate += cls.errors.ate;
    sum_ase += cls.errors.ase;
    sum_aoe += cls.errors.aoe;
    sum_ave += cls.errors.ave;
    ++evaluated;
    summary.per_class[class_id] = std::move(cls);
  }

  if (evaluated > 0) {
    const double inv = 1.0 / static_cast<double>(evaluated);
    summary.map = sum_ap * inv;
    summary.mate = sum_ate * inv;
    summary.mase = sum_ase * inv;
    summary.maoe = sum_aoe * inv;
    summary.mave = sum_ave * inv;
  }
  summary.ods_score =
      ods(summary.map, summary.mate, summary.mase, summary.maoe, summary.mave);
  return summary;
}

// ---------------------------------------------------------------------------
// report

namespace {

std::string format_threshold(double value) {
  std::ostringstream ss;
  ss << value;  // default precision trims "1.000000" to "1"
  return ss.str();
}

}  // namespace

std::string detection_report(const DetectionSummary& summary,
                             const EvalConfig& config) {
  nlohmann::ordered_json j;
  j["mAP"] = summary.map;
  j["mATE"] = summary.mate;
  j["mASE"] = summary.mase;
  j["mAOE"] = summary.maoe;
  j["mAVE"] = summary.mave;
  j["ODS"] = summary.ods_score;
  j["classes"] = nlohmann::ordered_json::object();
  for (const auto& [class_id, cls] : summary.per_class) {
    nlohmann::ordered_json jc;
    jc["gt_count"] = cls.gt_count;
    jc["AP"] = cls.ap;
    jc["AP_per_threshold"] = nlohmann::ordered_json::object();
    for (const auto& [th, ap] : cls.ap_per_threshold)
      jc["AP_per_threshold"][format_threshold(th)] = ap;
    jc["ATE"] = cls.errors.ate;
    jc["ASE"] = cls.errors.ase;
    jc["AOE"] = cls.errors.aoe;
    jc["AVE"] = cls.errors.ave;
    jc["pr_curves"] = nlohmann::ordered_json::object();
    for (const auto& [th, curve] : cls.pr_curves)
      jc["pr_curves"][format_threshold(th)] = curve;
    j["classes"][std::string(class_name(class_id))] = std::move(jc);
  }
  j["skipped_classes"] = nlohmann::ordered_json::array();
  for (const std::uint8_t c : summary.skipped_classes)
    j["skipped_classes"].push_back(std::string(class_name(c)));
  j["config"] = {{"dist_thresholds", config.dist_thresholds},
                 {"tp_threshold", config.tp_threshold},
                 {"min_recall", config.min_recall},
                 {"min_precision", config.min_precision},
                 {"eval_range", {config.eval_range_x, config.eval_range_y}}};
  return j.dump(2) + "\n";
}

}  // namespace gtforge
