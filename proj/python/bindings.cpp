#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "gtforge/autolabel.hpp"
#include "gtforge/eval_det.hpp"
#include "gtforge/eval_occ.hpp"
#include "gtforge/geometry.hpp"
#include "gtforge/occgen.hpp"
#include "gtforge/registration.hpp"
#include "gtforge/scene_io.hpp"
#include "gtforge/synth.hpp"
#include "gtforge/trajectory.hpp"

namespace py = pybind11;
using namespace gtforge;

namespace {

CloudKind kind_from_name(const std::string& name) {
  if (name == "lidar") return CloudKind::lidar;
  if (name == "radar") return CloudKind::radar;
  if (name == "plain") return CloudKind::plain;
  throw Error(ErrorKind::parse, "unknown cloud kind: " + name);
}

std::string kind_name(CloudKind kind) {
  switch (kind) {
    case CloudKind::lidar: return "lidar";
    case CloudKind::radar: return "radar";
    default: return "plain";
  }
}

py::dict summary_to_dict(const DetectionSummary& s) {
  py::dict out;
  out["mAP"] = s.map;
  out["mATE"] = s.mate;
  out["mASE"] = s.mase;
  out["mAOE"] = s.maoe;
  out["mAVE"] = s.mave;
  out["ODS"] = s.ods_score;
  py::dict classes;
  for (const auto& [class_id, cls] : s.per_class) {
    py::dict jc;
    jc["AP"] = cls.ap;
    jc["ATE"] = cls.errors.ate;
    jc["ASE"] = cls.errors.ase;
    jc["AOE"] = cls.errors.aoe;
    jc["AVE"] = cls.errors.ave;
    jc["gt_count"] = cls.gt_count;
    classes[py::str(std::string(class_name(class_id)))] = jc;
  }
  out["classes"] = classes;
  return out;
}

py::dict metrics_to_dict(const ConfusionCounts& counts, const OccMetrics& m) {
  py::dict out;
  out["SC_IoU"] = m.sc_iou;
  out["mIoU"] = m.miou;
  py::dict per_class;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    const auto denom = counts.tp[c] + counts.fp[c] + counts.fn[c];
    if (denom > 0)
      per_class[py::str(std::string(class_name(
          static_cast<std::uint8_t>(c))))] = m.iou[c];
  }
  out["IoU"] = per_class;
  out["evaluated_voxels"] = counts.evaluated_voxels;
  return out;
}

}  // namespace

PYBIND11_MODULE(_gtforge, m) {
  m.doc() = "Occupancy ground-truth generation and detection/occupancy "
            "benchmark scoring for multi-sensor driving clips";

  py::register_exception<Error>(m, "GtforgeError");

  py::class_<Vec3>(m, "Vec3")
      .def(py::init<>())
      .def(py::init<double, double, double>())
      .def_readwrite("x", &Vec3::x)
      .def_readwrite("y", &Vec3::y)
      .def_readwrite("z", &Vec3::z)
      .def("__repr__", [](const Vec3& v) {
        return "Vec3(" + std::to_string(v.x) + ", " + std::to_string(v.y) +
               ", " + std::to_string(v.z) + ")";
      });

  py::class_<Quat>(m, "Quat")
      .def(py::init<>())
      .def(py::init<double, double, double, double>())
      .def_readwrite("w", &Quat::w)
      .def_readwrite("x", &Quat::x)
      .def_readwrite("y", &Quat::y)
      .def_readwrite("z", &Quat::z);

  py::class_<Pose>(m, "Pose")
      .def(py::init<>())
      .def_readwrite("translation", &Pose::translation)
      .def_readwrite("rotation", &Pose::rotation)
      .def_readwrite("timestamp_us", &Pose::timestamp_us);

  py::class_<Box3D>(m, "Box3D")
      .def(py::init<>())
      .def_readwrite("center", &Box3D::center)
      .def_readwrite("size", &Box3D::size)
      .def_readwrite("yaw", &Box3D::yaw)
      .def_readwrite("vx", &Box3D::vx)
      .def_readwrite("vy", &Box3D::vy)
      .def_readwrite("class_id", &Box3D::class_id)
      .def_readwrite("track_id", &Box3D::track_id)
      .def_readwrite("score", &Box3D::score);

  py::class_<PointCloud>(m, "PointCloud")
      .def(py::init<>())
      .def_readwrite("positions", &PointCloud::positions)
      .def_readwrite("labels", &PointCloud::labels)
      .def_property(
          "kind",
          [](const PointCloud& c) { return kind_name(c.kind); },
          [](PointCloud& c, const std::string& k) { c.kind = kind_from_name(k); })
      .def("count", &PointCloud::count);

  py::class_<VoxelGrid>(m, "VoxelGrid")
      .def(py::init<>())
      .def_readwrite("origin", &VoxelGrid::origin)
      .def_readwrite("voxel_size", &VoxelGrid::voxel_size)
      .def_readwrite("dims", &VoxelGrid::dims)
      .def_readwrite("labels", &VoxelGrid::labels)
      .def("at", &VoxelGrid::at);

  py::class_<IcpResult>(m, "IcpResult")
      .def_readonly("transform", &IcpResult::transform)
      .def_readonly("rms", &IcpResult::rms)
      .def_readonly("confidence", &IcpResult::confidence)
      .def_readonly("iterations", &IcpResult::iterations)
      .def_readonly("converged", &IcpResult::converged);

  // geometry
  m.def("normalize_angle", &normalize_angle);
  m.def("pose_from_yaw", [](double x, double y, double z, double yaw) {
    return make_pose({x, y, z}, quat_from_yaw(yaw));
  }, py::arg("x"), py::arg("y"), py::arg("z"), py::arg("yaw"));
  m.def("compose", &compose);
  m.def("invert_pose", &invert_pose);
  m.def("transform_cloud", &transform_cloud);
  m.def("transform_box", &transform_box);
  m.def("points_in_box", &points_in_box);
  m.def("bev_center_distance", &bev_center_distance);

  // trajectory
  m.def("interpolate_box", &interpolate_box, py::arg("b0"), py::arg("t0_us"),
        py::arg("b1"), py::arg("t1_us"), py::arg("t_us"));

  // registration
  m.def(
      "icp_align",
      [](const PointCloud& source, const PointCloud& target,
         int max_iterations, double max_correspondence_dist,
         double convergence_eps, double inlier_threshold) {
        IcpParams params;
        params.max_iterations = max_iterations;
        params.max_correspondence_dist = max_correspondence_dist;
        params.convergence_eps = convergence_eps;
        params.inlier_threshold = inlier_threshold;
        return icp_align(source, target, params);
      },
      py::arg("source"), py::arg("target"), py::arg("max_iterations") = 50,
      py::arg("max_correspondence_dist") = 1.0,
      py::arg("convergence_eps") = 1e-5, py::arg("inlier_threshold") = 0.1);
  m.def("registration_confidence", &registration_confidence);

  // metrics
  m.def("ods", &ods, py::arg("map"), py::arg("mate"), py::arg("mase"),
        py::arg("maoe"), py::arg("mave"));
  m.def("evaluate_detection_files",
        [](const std::filesystem::path& gt, const std::filesystem::path& pred) {
          return summary_to_dict(
              evaluate_detections(read_annotations(gt), read_annotations(pred)));
        },
        py::arg("gt"), py::arg("pred"));
  m.def("evaluate_occupancy_grids",
        [](const std::filesystem::path& gt, const std::filesystem::path& pred,
           bool strict_miou) {
          const ConfusionCounts counts =
              confusion(read_voxel_grid(pred), read_voxel_grid(gt));
          return metrics_to_dict(counts, occ_metrics(counts, strict_miou));
        },
        py::arg("gt"), py::arg("pred"), py::arg("strict_miou") = false);

  // io
  m.def("read_point_cloud",
        [](const std::filesystem::path& path, const std::string& kind) {
          return read_point_cloud(path, kind_from_name(kind));
        },
        py::arg("path"), py::arg("kind") = "lidar");
  m.def("write_point_cloud", &write_point_cloud);
  m.def("read_voxel_grid", &read_voxel_grid);
  m.def("write_voxel_grid", &write_voxel_grid);
  m.def("read_annotation_file", [](const std::filesystem::path& path) {
    py::list out;
    for (const AnnotationFrame& frame : read_annotations(path)) {
      py::dict jf;
      jf["timestamp_us"] = frame.timestamp_us;
      jf["boxes"] = frame.boxes;
      out.append(jf);
    }
    return out;
  });

  // synthetic clips and the occupancy pipeline
  m.def("generate_clip",
        [](const std::filesystem::path& scenario,
           const std::filesystem::path& out_dir) {
          generate_clip(load_scenario(scenario), out_dir);
          return (out_dir / "manifest.json").string();
        },
        py::arg("scenario"), py::arg("out_dir"));
  m.def("generate_occupancy",
        [](const std::filesystem::path& manifest,
           const std::filesystem::path& out_dir, const std::string& labels_dir,
           int threads) {
          const ClipManifest clip = load_clip(manifest);
          generate_occupancy(clip, load_clip_annotations(clip),
                             load_clip_static_labels(clip, labels_dir), out_dir,
                             OccConfig{}, IcpParams{}, threads);
        },
        py::arg("manifest"), py::arg("out_dir"), py::arg("labels_dir") = "",
        py::arg("threads") = 1);

  m.def("class_name", [](std::uint8_t code) {
    return std::string(class_name(code));
  });
  m.def("class_code", [](const std::string& name) { return class_code(name); });
}
