"""Triangle meshes: loading, indexing, ray and distance queries, generators."""

from coverplan.geometry.mesh import RayHit, TriangleMesh, ray_intersect, segment_min_distance
from coverplan.geometry.meshio import FORMATS, load_mesh, read_ply_face_colors, write_mesh
from coverplan.geometry.targets import (
    OCCLUDED_STYLES,
    OccludedTarget,
    generate_box,
    generate_occluded_target,
    generate_sphere,
)

__all__ = [
    "FORMATS",
    "OCCLUDED_STYLES",
    "OccludedTarget",
    "RayHit",
    "TriangleMesh",
    "generate_box",
    "generate_occluded_target",
    "generate_sphere",
    "load_mesh",
    "ray_intersect",
    "read_ply_face_colors",
    "segment_min_distance",
    "write_mesh",
]
