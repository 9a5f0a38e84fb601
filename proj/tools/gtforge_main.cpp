#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "gtforge/autolabel.hpp"
#include "gtforge/eval_det.hpp"
#include "gtforge/eval_occ.hpp"
#include "gtforge/geometry.hpp"
#include "gtforge/occgen.hpp"
#include "gtforge/registration.hpp"
#include "gtforge/scene_io.hpp"
#include "gtforge/synth.hpp"

namespace fs = std::filesystem;
using namespace gtforge;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitIoFormat = 2;
constexpr int kExitValidation = 3;

struct GlobalOptions {
  int threads = 0;  // 0 = auto
  std::uint64_t seed = 0;
  std::string log_level = "info";
};

int default_threads() {
  if (const char* env = std::getenv("GTFORGE_THREADS")) {
    try {
      return std::max(0, std::stoi(env));
    } catch (...) {
      return 0;
    }
  }
  return 0;
}

int run_occ_gen(const GlobalOptions& global, const std::string& clip_path,
                const std::string& labels_dir, const std::string& out_dir,
                OccConfig config) {
  const auto start = std::chrono::steady_clock::now();
  const ClipManifest clip = load_clip(clip_path);
  const FrameBoxes annotations = load_clip_annotations(clip);
  const auto static_labels = load_clip_static_labels(clip, labels_dir);
  generate_occupancy(clip, annotations, static_labels, out_dir, config,
                     IcpParams{}, global.threads);
  if (global.log_level == "debug") {
    const double secs = std::chrono::duration<double>(
                            std::chrono::steady_clock::now() - start)
                            .count();
    std::cerr << "occ-gen: " << clip.keyframe_indices().size()
              << " keyframes in " << secs << " s\n";
  }
  return kExitOk;
}

int run_eval_det(const std::string& gt_path, const std::string& pred_path,
                 const std::string& out_path) {
  const auto gt = read_annotations(gt_path);
  const auto pred = read_annotations(pred_path);
  const EvalConfig config;
  const DetectionSummary summary = evaluate_detections(gt, pred, config);
  atomic_write_text(out_path, detection_report(summary, config));
  return kExitOk;
}

int run_eval_occ(const std::string& gt_dir, const std::string& pred_dir,
                 const std::string& out_path, bool strict_miou, bool quiet) {
  auto collect = [](const std::string& dir) {
    std::map<std::int64_t, fs::path> out;
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (entry.path().extension() != ".occ") continue;
      try {
        out[std::stoll(entry.path().stem().string())] = entry.path();
      } catch (...) {
        throw Error(ErrorKind::parse,
                    "grid filename is not a timestamp: " +
                        entry.path().string());
      }
    }
    return out;
  };
  const auto gt_files = collect(gt_dir);
  const auto pred_files = collect(pred_dir);
  if (gt_files.empty())
    throw Error(ErrorKind::io, "no .occ files under " + gt_dir);
  {
    std::set<std::int64_t> a, b;
    for (const auto& [ts, _] : gt_files) a.insert(ts);
    for (const auto& [ts, _] : pred_files) b.insert(ts);
    if (a != b)
      throw Error(ErrorKind::frame_set_mismatch,
                  "gt and prediction grid timestamps differ");
  }
  ConfusionCounts total;
  for (const auto& [ts, gt_path] : gt_files) {
    const VoxelGrid gt = read_voxel_grid(gt_path);
    const VoxelGrid pred = read_voxel_grid(pred_files.at(ts));
    total += confusion(pred, gt);
  }
  if (total.pred_ignore_voxels > 0 && !quiet)
    std::cerr << "warning: " << total.pred_ignore_voxels
              << " prediction voxels carried the ignore code; treated as free\n";
  const OccMetrics metrics = occ_metrics(total, strict_miou);
  atomic_write_text(out_path,
                    occupancy_report(total, metrics, gt_files.size(),
                                     strict_miou));
  return kExitOk;
}

int run_autolabel(const GlobalOptions& global, const std::string& clip_path,
                  const std::string& out_path, RefineParams params) {
  params.seed = global.seed;
  const ClipManifest clip = load_clip(clip_path);
  const FrameBoxes annotations = load_clip_annotations(clip);
  const RefineOutput refined = refine_boxes(clip, annotations, params);
  std::vector<AnnotationFrame> frames;
  for (const auto& [ts, boxes] : refined.frames)
    frames.push_back({ts, boxes});
  write_annotations(out_path, frames);
  return kExitOk;
}

int run_synth(const std::string& scenario_path, const std::string& out_dir) {
  const ScenarioSpec spec = load_scenario(scenario_path);
  generate_clip(spec, out_dir);
  return kExitOk;
}

int run_icp(const std::string& src_path, const std::string& dst_path,
            const std::string& kind_name) {
  const CloudKind kind =
      kind_name == "radar" ? CloudKind::radar : CloudKind::lidar;
  const PointCloud src = read_point_cloud(src_path, kind);
  const PointCloud dst = read_point_cloud(dst_path, kind);
  const IcpResult result = icp_align(src, dst);
  std::ostringstream out;
  out << "translation: " << result.transform.translation.x << " "
      << result.transform.translation.y << " "
      << result.transform.translation.z << "\n"
      << "rotation_wxyz: " << result.transform.rotation.w << " "
      << result.transform.rotation.x << " " << result.transform.rotation.y
      << " " << result.transform.rotation.z << "\n"
      << "rms: " << result.rms << "\n"
      << "confidence: " << result.confidence << "\n"
      << "iterations: " << result.iterations << "\n"
      << "converged: " << (result.converged ? "true" : "false") << "\n";
  std::cout << out.str();
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Occupancy ground-truth generation and benchmark scoring for "
               "multi-sensor driving clips"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand

  GlobalOptions global;
  global.threads = default_threads();
  app.add_option("--threads", global.threads,
                 "worker threads (0 = hardware default)")
      ->check(CLI::NonNegativeNumber);
  app.add_option("--seed", global.seed, "seed for randomized stages");
  app.add_option("--log-level", global.log_level, "quiet|info|debug");

  // occ-gen
  auto* occ = app.add_subcommand("occ-gen", "generate occupancy grids");
  std::string occ_clip, occ_labels, occ_out;
  OccConfig occ_config;
  std::vector<double> occ_range;
  occ->add_option("--clip", occ_clip, "clip manifest")->required();
  occ->add_option("--labels", occ_labels, "static label directory");
  occ->add_option("--out", occ_out, "output directory")->required();
  occ->add_option("--voxel-size", occ_config.voxel_size, "voxel edge, m");
  occ->add_option("--range", occ_range,
                  "x0,x1,y0,y1,z0,z1 evaluation range, m")
      ->delimiter(',')
      ->expected(6);
  occ->add_option("--filter-radius", occ_config.filter_radius,
                  "radius filter radius, m");
  occ->add_option("--min-neighbors", occ_config.filter_min_neighbors,
                  "radius filter neighbor count");
  bool no_nonkey = false;
  occ->add_flag("--no-nonkey", no_nonkey,
                "aggregate keyframe object points only");

  // eval-det
  auto* det = app.add_subcommand("eval-det", "score 3D detections");
  std::string det_gt, det_pred, det_out;
  det->add_option("--gt", det_gt, "ground-truth annotation file")->required();
  det->add_option("--pred", det_pred, "prediction annotation file")->required();
  det->add_option("--out", det_out, "report path")->required();

  // eval-occ
  auto* eocc = app.add_subcommand("eval-occ", "score occupancy grids");
  std::string eocc_gt, eocc_pred, eocc_out;
  bool strict_miou = false;
  eocc->add_option("--gt-dir", eocc_gt, "ground-truth grid directory")
      ->required();
  eocc->add_option("--pred-dir", eocc_pred, "prediction grid directory")
      ->required();
  eocc->add_option("--out", eocc_out, "report path")->required();
  eocc->add_flag("--strict-miou", strict_miou,
                 "average all 11 classes, absent ones as zero");

  // autolabel
  auto* label = app.add_subcommand("autolabel",
                                   "propagate keyframe boxes to all frames");
  std::string label_clip, label_out;
  RefineParams refine_params;
  label->add_option("--clip", label_clip, "clip manifest")->required();
  label->add_option("--out", label_out, "output annotation file")->required();
  label->add_option("--theta-conf", refine_params.conf_threshold,
                    "acceptance confidence threshold");
  label->add_option("--a-thresh", refine_params.a_thresh,
                    "max plausible acceleration, m/s^2");
  label->add_option("--w-thresh", refine_params.w_thresh,
                    "max plausible yaw rate, rad/s");

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic clip");
  std::string synth_scenario, synth_out;
  synth->add_option("--scenario", synth_scenario, "scenario file")->required();
  synth->add_option("--out", synth_out, "output directory")->required();

  // icp
  auto* icp = app.add_subcommand("icp", "align two point clouds");
  std::string icp_src, icp_dst, icp_kind = "lidar";
  icp->add_option("--src", icp_src, "source cloud")->required();
  icp->add_option("--dst", icp_dst, "target cloud")->required();
  icp->add_option("--kind", icp_kind, "lidar|radar")
      ->check(CLI::IsMember({"lidar", "radar"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*occ) {
      if (occ_range.size() == 6)
        for (int i = 0; i < 6; ++i) occ_config.range[i] = occ_range[i];
      occ_config.use_non_keyframes = !no_nonkey;
      return run_occ_gen(global, occ_clip, occ_labels, occ_out, occ_config);
    }
    if (*det) return run_eval_det(det_gt, det_pred, det_out);
    if (*eocc)
      return run_eval_occ(eocc_gt, eocc_pred, eocc_out, strict_miou,
                          global.log_level == "quiet");
    if (*label) return run_autolabel(global, label_clip, label_out,
                                     refine_params);
    if (*synth) return run_synth(synth_scenario, synth_out);
    if (*icp) return run_icp(icp_src, icp_dst, icp_kind);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.category() == ErrorCategory::io_format ? kExitIoFormat
                                                    : kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIoFormat;
  }
  return kExitUsage;
}
