"""Deformable two-surface light field renderer for animatable characters."""

__version__ = "0.1.0"

from .mesh import (
    CharacterConfig,
    Joint,
    MeshError,
    MotionWindow,
    SkeletalPose,
    SkinnedMesh,
    TwoSurfaceFrame,
    build_offset_surface,
    build_test_character,
    build_two_surface_frame,
    compute_vertex_normals,
    laplacian_smooth,
    pose_mesh,
    validate_mesh,
)
