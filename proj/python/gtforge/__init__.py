"""Occupancy ground-truth generation and benchmark scoring for multi-sensor
driving clips. Thin python surface over the C++ core."""

try:  # installed layout: extension lives inside the package
    from . import _gtforge as _impl
except ImportError:  # build-tree layout: extension sits on PYTHONPATH
    import _gtforge as _impl

_EXPORTS = [
    "Box3D",
    "GtforgeError",
    "IcpResult",
    "PointCloud",
    "Pose",
    "Quat",
    "Vec3",
    "VoxelGrid",
    "bev_center_distance",
    "class_code",
    "class_name",
    "compose",
    "evaluate_detection_files",
    "evaluate_occupancy_grids",
    "generate_clip",
    "generate_occupancy",
    "icp_align",
    "interpolate_box",
    "invert_pose",
    "normalize_angle",
    "ods",
    "points_in_box",
    "pose_from_yaw",
    "read_annotation_file",
    "read_point_cloud",
    "read_voxel_grid",
    "registration_confidence",
    "transform_box",
    "transform_cloud",
    "write_point_cloud",
    "write_voxel_grid",
]

globals().update({name: getattr(_impl, name) for name in _EXPORTS})

__all__ = _EXPORTS
__version__ = "0.1.0"
