"""Skinned mesh representation, skeletal posing, and offset-surface construction."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np


class MeshError(Exception):
    """Invalid mesh topology, geometry, or contract violation."""


def euler_to_matrix(angles) -> np.ndarray:
    """Rotation matrix for intrinsic Z*Y*X Euler angles (radians), R = Rz @ Ry @ Rx."""
    rx, ry, rz = float(angles[0]), float(angles[1]), float(angles[2])
    cx, sx = np.cos(rx), np.sin(rx)
    cy, sy = np.cos(ry), np.sin(ry)
    cz, sz = np.cos(rz), np.sin(rz)
    Rx = np.array([[1, 0, 0], [0, cx, -sx], [0, sx, cx]])
    Ry = np.array([[cy, 0, sy], [0, 1, 0], [-sy, 0, cy]])
    Rz = np.array([[cz, -sz, 0], [sz, cz, 0], [0, 0, 1]])
    return Rz @ Ry @ Rx


def rigid_transform(rotation: np.ndarray, translation) -> np.ndarray:
    """4x4 homogeneous transform from a 3x3 rotation and a 3-vector translation."""
    T = np.eye(4)
    T[:3, :3] = rotation
    T[:3, 3] = translation
    return T


def rigid_inverse(T: np.ndarray) -> np.ndarray:
    """Exact inverse of a rigid 4x4 transform: [R^T | -R^T t]."""
    R = T[:3, :3]
    out = np.eye(4)
    out[:3, :3] = R.T
    out[:3, 3] = -(R.T @ T[:3, 3])
    return out


@dataclass
class Joint:
    parent: int  # -1 for the root
    rest_translation: np.ndarray  # offset from parent joint, meters
    rest_rotation: np.ndarray  # Euler radians

    def rest_local(self) -> np.ndarray:
        return rigid_transform(euler_to_matrix(self.rest_rotation), self.rest_translation)


@dataclass
class SkeletalPose:
    joint_rotations: np.ndarray  # (J, 3) Euler radians
    root_translation: np.ndarray  # (3,) meters
    frame_index: int = 0

    def __post_init__(self):
        self.joint_rotations = np.asarray(self.joint_rotations, dtype=np.float64)
        self.root_translation = np.asarray(self.root_translation, dtype=np.float64)
        if not np.all(np.isfinite(self.joint_rotations)) or not np.all(np.isfinite(self.root_translation)):
            raise MeshError("pose parameters must be finite")
        if self.frame_index < 0:
            raise MeshError("frame_index must be >= 0")


@dataclass
class MotionWindow:
    """Poses ordered oldest (f-T) to newest (f); length exactly T+1."""

    poses: list

    def __post_init__(self):
        idx = [p.frame_index for p in self.poses]
        if any(b - a != 1 for a, b in zip(idx, idx[1:])):
            raise MeshError(f"window frame indices must increase by 1, got {idx}")

    @property
    def T(self) -> int:
        return len(self.poses) - 1

    @property
    def current(self) -> SkeletalPose:
        return self.poses[-1]


@dataclass
class SkinnedMesh:
    """Watertight triangle mesh with UV atlas, chain skeleton, and skin weights.

    UV seams are realized by duplicating vertices at identical 3D positions, so
    watertightness is defined on position-welded topology while every vertex
    slot carries exactly one UV coordinate.
    """

    vertices_rest: np.ndarray  # (N, 3) float64, meters
    faces: np.ndarray  # (F, 3) int32
    uv_coords: np.ndarray  # (N, 2) float64 in [0,1]^2
    joints: list  # list[Joint]
    weight_joints: np.ndarray  # (N, 4) int32, -1 padding
    weight_values: np.ndarray  # (N, 4) float64
    _weld: np.ndarray = field(default=None, repr=False)  # cached position-weld map

    @property
    def n_vertices(self) -> int:
        return len(self.vertices_rest)

    @property
    def n_joints(self) -> int:
        return len(self.joints)

    def weld_map(self) -> np.ndarray:
        """Map each vertex index to a canonical index shared by all vertices at the
        same (bitwise identical) rest position."""
        if self._weld is None:
            self._weld = build_weld_map(self.vertices_rest)
        return self._weld


def build_weld_map(vertices: np.ndarray) -> np.ndarray:
    """Canonical vertex index per exact 3D position (first occurrence wins)."""
    v = np.ascontiguousarray(vertices)
    view = v.view([("x", v.dtype), ("y", v.dtype), ("z", v.dtype)]).reshape(-1)
    _, first, inverse = np.unique(view, return_index=True, return_inverse=True)
    return first[inverse].astype(np.int64)


def welded_edges(faces: np.ndarray, weld: np.ndarray):
    """Undirected edge list on welded topology, one row per face edge."""
    f = weld[faces]
    e = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]], axis=0)
    return np.sort(e, axis=1)


def check_watertight(mesh: SkinnedMesh) -> None:
    """Every welded edge must be shared by exactly 2 faces."""
    e = welded_edges(mesh.faces, mesh.weld_map())
    _, counts = np.unique(e, axis=0, return_counts=True)
    bad = np.sum(counts != 2)
    if bad:
        raise MeshError(f"mesh is not watertight: {bad} edges not shared by exactly 2 faces")


def euler_characteristic(mesh: SkinnedMesh) -> int:
    """V - E + F on position-welded topology."""
    weld = mesh.weld_map()
    V = len(np.unique(weld))
    E = len(np.unique(welded_edges(mesh.faces, weld), axis=0))
    F = len(mesh.faces)
    return V - E + F


def _triangles_overlap_2d(tri_a: np.ndarray, tri_b: np.ndarray, eps: float = 1e-12) -> np.ndarray:
    """Vectorized positive-area overlap test for UV triangle pairs.

    tri_a, tri_b: (M, 3, 2). Returns a bool mask. Uses separating-axis tests over
    the 6 edge normals; touching along an edge or vertex does not count as overlap.
    """
    def axes(tri):
        e = np.roll(tri, -1, axis=1) - tri  # (M,3,2)
        return np.stack([e[..., 1], -e[..., 0]], axis=-1)  # normals

    sep = np.zeros(len(tri_a), dtype=bool)
    for tri, axs in ((tri_a, axes(tri_a)), (tri_b, axes(tri_b))):
        for k in range(3):
            ax = axs[:, k, :]  # (M,2)
            pa = np.einsum("mij,mj->mi", tri_a, ax)
            pb = np.einsum("mij,mj->mi", tri_b, ax)
            sep |= (pa.max(axis=1) <= pb.min(axis=1) + eps) | (pb.max(axis=1) <= pa.min(axis=1) + eps)
    return ~sep


def check_uv_atlas(mesh: SkinnedMesh, chunk: int = 262144) -> None:
    """No two triangles may overlap (positive area) in UV space; all UVs in [0,1]^2."""
    uv = mesh.uv_coords
    if uv.min() < 0.0 or uv.max() > 1.0:
        raise MeshError("uv coordinates outside [0,1]^2")
    tris = uv[mesh.faces]  # (F,3,2)
    lo, hi = tris.min(axis=1), tris.max(axis=1)
    F = len(tris)
    # bbox prefilter over all pairs, then exact SAT test on candidates
    ii, jj = np.triu_indices(F, k=1)
    for s in range(0, len(ii), chunk):
        i, j = ii[s:s + chunk], jj[s:s + chunk]
        cand = np.all(lo[i] < hi[j], axis=1) & np.all(lo[j] < hi[i], axis=1)
        i, j = i[cand], j[cand]
        if len(i) == 0:
            continue
        bad = _triangles_overlap_2d(tris[i], tris[j])
        if np.any(bad):
            a, b = int(i[np.argmax(bad)]), int(j[np.argmax(bad)])
            raise MeshError(f"uv atlas triangles {a} and {b} overlap")


def check_skin_weights(mesh: SkinnedMesh, tol: float = 1e-6) -> None:
    if np.any(mesh.weight_values < -tol):
        raise MeshError("negative skin weight")
    s = mesh.weight_values.sum(axis=1)
    worst = np.abs(s - 1.0).max()
    if worst > tol:
        raise MeshError(f"skin weights do not sum to 1 (worst deviation {worst:.3g})")


def validate_mesh(mesh: SkinnedMesh) -> None:
    """Run all SkinnedMesh invariants; raises MeshError on the first violation."""
    check_watertight(mesh)
    check_skin_weights(mesh)
    check_uv_atlas(mesh)


# ---------------------------------------------------------------------------
# posing


def joint_world_transforms(joints, joint_rotations, root_translation=None) -> np.ndarray:
    """World 4x4 per joint for the given pose; identity rotations give the bind pose."""
    J = len(joints)
    world = np.zeros((J, 4, 4))
    for j, joint in enumerate(joints):
        local = joint.rest_local() @ rigid_transform(euler_to_matrix(joint_rotations[j]), (0, 0, 0))
        if joint.parent < 0:
            world[j] = local
            if root_translation is not None:
                world[j] = rigid_transform(np.eye(3), root_translation) @ local
        else:
            if joint.parent >= j:
                raise MeshError("joints must be ordered parent-before-child")
            world[j] = world[joint.parent] @ local
    return world


def pose_mesh(mesh: SkinnedMesh, pose: SkeletalPose) -> np.ndarray:
    """Linear blend skinning of the rest vertices under the given pose."""
    if pose.joint_rotations.shape != (mesh.n_joints, 3):
        raise MeshError(
            f"pose has {pose.joint_rotations.shape} joint rotations, mesh has {mesh.n_joints} joints"
        )
    bind = joint_world_transforms(mesh.joints, np.zeros((mesh.n_joints, 3)))
    world = joint_world_transforms(mesh.joints, pose.joint_rotations, pose.root_translation)
    inv_bind = np.stack([rigid_inverse(b) for b in bind])
    skin = np.einsum("jab,jbc->jac", world, inv_bind)  # (J,4,4)

    wj = np.where(mesh.weight_joints < 0, 0, mesh.weight_joints)
    M = skin[wj]  # (N,4,4,4)
    blended = np.einsum("ns,nsab->nab", mesh.weight_values, M)  # (N,4,4)
    v = mesh.vertices_rest
    out = np.einsum("nab,nb->na", blended[:, :3, :3], v) + blended[:, :3, 3]
    if not np.all(np.isfinite(out)):
        raise MeshError("posed vertices are not finite")
    return out


def compute_vertex_normals(vertices: np.ndarray, faces: np.ndarray) -> np.ndarray:
    """Area-weighted vertex normals, accumulated over position-welded vertices.

    Raises MeshError naming the vertex if a normal cancels to zero.
    """
    v = np.asarray(vertices, dtype=np.float64)
    tri = v[faces]
    fn = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])  # 2*area-weighted
    areas = 0.5 * np.linalg.norm(fn, axis=1)
    if np.any(areas <= 1e-12):
        raise MeshError(f"degenerate face {int(np.argmax(areas <= 1e-12))} (area <= 1e-12)")
    weld = build_weld_map(v)
    acc = np.zeros_like(v)
    for c in range(3):
        np.add.at(acc, weld[faces[:, c]], fn)
    acc = acc[weld]  # duplicates share the welded accumulation
    norms = np.linalg.norm(acc, axis=1)
    if np.any(norms < 1e-12):
        raise MeshError(f"vertex {int(np.argmin(norms))} has a zero accumulated normal")
    return acc / norms[:, None]


def build_offset_surface(inner: np.ndarray, normals: np.ndarray, d: float,
                         faces: np.ndarray = None, check_self_intersection: bool = True) -> np.ndarray:
    """Displace each vertex by d along its unit normal.

    Warns (never errors) when the offset surface self-intersects; detection is a
    sampled triangle-triangle test and needs `faces`.
    """
    if d < 0:
        raise MeshError("offset distance must be >= 0")
    n = np.asarray(normals, dtype=np.float64)
    err = np.abs(np.linalg.norm(n, axis=1) - 1.0).max()
    if err > 1e-6:
        raise MeshError(f"normals must be unit length (worst deviation {err:.3g})")
    outer = np.asarray(inner, dtype=np.float64) + d * n
    if check_self_intersection and faces is not None and d > 0:
        if _sampled_self_intersection(outer, faces):
            warnings.warn("offset surface self-intersects (d exceeds local reach)", RuntimeWarning)
    return outer


def _tri_tri_intersect(t1: np.ndarray, t2: np.ndarray) -> np.ndarray:
    """Vectorized Moller interval test for 3D triangle pairs (M,3,3); coplanar pairs
    are reported as non-intersecting (measure-zero for the sampling check)."""
    eps = 1e-12

    def plane(tri):
        n = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
        return n, -np.einsum("mi,mi->m", n, tri[:, 0])

    n2, d2 = plane(t2)
    dv1 = np.einsum("mi,mki->mk", n2, t1) + d2[:, None]
    n1, d1 = plane(t1)
    dv2 = np.einsum("mi,mki->mk", n1, t2) + d1[:, None]

    same1 = np.all(dv1 > eps, axis=1) | np.all(dv1 < -eps, axis=1)
    same2 = np.all(dv2 > eps, axis=1) | np.all(dv2 < -eps, axis=1)
    coplanar = np.all(np.abs(dv1) <= eps, axis=1)
    alive = ~(same1 | same2 | coplanar)
    result = np.zeros(len(t1), dtype=bool)
    if not np.any(alive):
        return result

    D = np.cross(n1, n2)
    axis = np.argmax(np.abs(D), axis=1)
    proj1 = np.take_along_axis(t1[..., :], axis[:, None, None], axis=2)[..., 0]
    proj2 = np.take_along_axis(t2[..., :], axis[:, None, None], axis=2)[..., 0]

    def interval(proj, dv):
        # choose the vertex on the opposite side of the other triangle's plane
        lo = np.full(len(proj), np.inf)
        hi = np.full(len(proj), -np.inf)
        for a in range(3):
            for b in range(3):
                if a >= b:
                    continue
                cross_pair = dv[:, a] * dv[:, b] < 0
                denom = dv[:, a] - dv[:, b]
                tt = np.where(np.abs(denom) > eps,
                              proj[:, a] + (proj[:, b] - proj[:, a]) * dv[:, a] / np.where(np.abs(denom) > eps, denom, 1.0),
                              proj[:, a])
                lo = np.where(cross_pair, np.minimum(lo, tt), lo)
                hi = np.where(cross_pair, np.maximum(hi, tt), hi)
        on_plane = np.abs(dv) <= eps
        for a in range(3):
            lo = np.where(on_plane[:, a], np.minimum(lo, proj[:, a]), lo)
            hi = np.where(on_plane[:, a], np.maximum(hi, proj[:, a]), hi)
        return lo, hi

    lo1, hi1 = interval(proj1, dv1)
    lo2, hi2 = interval(proj2, dv2)
    overlap = (np.minimum(hi1, hi2) - np.maximum(lo1, lo2)) > eps
    result[alive] = overlap[alive]
    return result


def _sampled_self_intersection(vertices: np.ndarray, faces: np.ndarray,
                               max_pairs: int = 20000, seed: int = 0) -> bool:
    """Sampled detection of triangle-triangle intersections between faces that do
    not share a welded vertex. Grid-hash prefilter keeps the candidate set local."""
    tri = vertices[faces]
    lo, hi = tri.min(axis=1), tri.max(axis=1)
    cell = float(np.median(hi - lo) + 1e-12) * 1.01
    weld = build_weld_map(vertices)
    wf = weld[faces]

    buckets = {}
    for f in range(len(faces)):
        c0 = np.floor(lo[f] / cell).astype(np.int64)
        c1 = np.floor(hi[f] / cell).astype(np.int64)
        for x in range(c0[0], c1[0] + 1):
            for y in range(c0[1], c1[1] + 1):
                for z in range(c0[2], c1[2] + 1):
                    buckets.setdefault((x, y, z), []).append(f)

    pairs = set()
    for members in buckets.values():
        for a in range(len(members)):
            for b in range(a + 1, len(members)):
                i, j = members[a], members[b]
                if np.any(lo[i] > hi[j]) or np.any(lo[j] > hi[i]):
                    continue
                if set(wf[i]) & set(wf[j]):
                    continue  # adjacent faces always touch
                pairs.add((min(i, j), max(i, j)))
    if not pairs:
        return False
    pairs = np.array(sorted(pairs))
    bb = np.all(lo[pairs[:, 0]] <= hi[pairs[:, 1]], axis=1) & np.all(lo[pairs[:, 1]] <= hi[pairs[:, 0]], axis=1)
    pairs = pairs[bb]
    if len(pairs) > max_pairs:
        rng = np.random.default_rng(seed)
        pairs = pairs[rng.choice(len(pairs), max_pairs, replace=False)]
    if len(pairs) == 0:
        return False
    return bool(np.any(_tri_tri_intersect(tri[pairs[:, 0]], tri[pairs[:, 1]])))


@dataclass
class TwoSurfaceFrame:
    """Posed inner surface plus its normal-offset outer copy; shared topology."""

    mesh: SkinnedMesh
    inner_vertices: np.ndarray
    outer_vertices: np.ndarray
    inner_normals: np.ndarray
    offset_d: float

    @property
    def faces(self) -> np.ndarray:
        return self.mesh.faces

    @property
    def uv_coords(self) -> np.ndarray:
        return self.mesh.uv_coords

    def outer_normals(self) -> np.ndarray:
        return compute_vertex_normals(self.outer_vertices, self.mesh.faces)

    def validate(self) -> None:
        dist = np.linalg.norm(self.outer_vertices - self.inner_vertices, axis=1)
        if np.abs(dist - self.offset_d).max() > 1e-6:
            raise MeshError("offset distance violated")
        if np.abs(np.linalg.norm(self.inner_normals, axis=1) - 1.0).max() > 1e-6:
            raise MeshError("inner normals not unit length")


def build_two_surface_frame(mesh: SkinnedMesh, pose: SkeletalPose, d: float,
                            check_self_intersection: bool = False) -> TwoSurfaceFrame:
    """Pose the mesh and construct the offset outer surface at distance d."""
    inner = pose_mesh(mesh, pose)
    normals = compute_vertex_normals(inner, mesh.faces)
    outer = build_offset_surface(inner, normals, d, faces=mesh.faces,
                                 check_self_intersection=check_self_intersection)
    return TwoSurfaceFrame(mesh, inner, outer, normals, d)


# ---------------------------------------------------------------------------
# procedural test character


@dataclass
class CharacterConfig:
    segments: int = 8
    radial: int = 16
    joints: int = 3
    length: float = 0.7  # meters, along +z
    radius: float = 0.08
    cap_rings: int = 3  # dome-cap latitude rings; capsule ends smooth gracefully

    def __post_init__(self):
        if self.segments < 2 or self.radial < 8 or self.joints < 2:
            raise MeshError("need segments >= 2, radial >= 8, joints >= 2")
        if self.cap_rings < 1 or self.length <= 2 * self.radius:
            raise MeshError("need cap_rings >= 1 and length > 2*radius")


# UV atlas layout: body strip plus two cap disks, boundaries on binary fractions
_BODY_U = (1.0 / 16.0, 9.0 / 16.0)
_BODY_V = (1.0 / 16.0, 15.0 / 16.0)
_CAP_CENTERS = ((0.8125, 0.25), (0.8125, 0.75))
_CAP_RADIUS = 0.11


def build_test_character(config: CharacterConfig) -> SkinnedMesh:
    """Watertight capsule figure with a chain skeleton and smooth skin weights.

    Cylindrical body plus dome caps. The tube wrap seam and the cap rims
    duplicate vertices (identical positions, distinct UVs) so the atlas stays
    injective; see SkinnedMesh.
    """
    S, K, J, M = config.segments, config.radial, config.joints, config.cap_rings
    L, r = config.length, config.radius
    body_lo, body_hi = r, L - r  # dome caps occupy the tube ends

    verts, uvs, faces = [], [], []

    def ring_pos(s, k):
        a = 2.0 * np.pi * (k % K) / K
        return (r * np.cos(a), r * np.sin(a), body_lo + (body_hi - body_lo) * s / S)

    # body grid: (S+1) rings x (K+1) columns, column K repeats column 0 positions
    body_idx = np.zeros((S + 1, K + 1), dtype=np.int64)
    for s in range(S + 1):
        for k in range(K + 1):
            body_idx[s, k] = len(verts)
            verts.append(ring_pos(s, k))
            u = _BODY_U[0] + (k / K) * (_BODY_U[1] - _BODY_U[0])
            v = _BODY_V[0] + (s / S) * (_BODY_V[1] - _BODY_V[0])
            uvs.append((u, v))
    for s in range(S):
        for k in range(K):
            a, b = body_idx[s, k], body_idx[s, k + 1]
            c, d_ = body_idx[s + 1, k + 1], body_idx[s + 1, k]
            faces.append((a, b, c))  # outward CCW
            faces.append((a, c, d_))

    # dome caps: own UV disk islands; the equator ring duplicates body ring
    # positions bitwise so position welding keeps the surface closed
    for cap, (cu, cv) in enumerate(_CAP_CENTERS):
        sign = -1.0 if cap == 0 else 1.0
        z_pole = 0.0 if cap == 0 else L
        z_center = body_lo if cap == 0 else body_hi
        s_ring = 0 if cap == 0 else S
        pole = len(verts)
        verts.append((0.0, 0.0, z_pole))
        uvs.append((cu, cv))
        rings = []
        for m in range(1, M + 1):
            ring = []
            phi = 0.5 * np.pi * m / M
            for k in range(K):
                ring.append(len(verts))
                if m == M:
                    verts.append(ring_pos(s_ring, k))
                else:
                    a = 2.0 * np.pi * k / K
                    verts.append((r * np.sin(phi) * np.cos(a), r * np.sin(phi) * np.sin(a),
                                  z_center + sign * r * np.cos(phi)))
                a = 2.0 * np.pi * k / K
                rho = _CAP_RADIUS * m / M
                uvs.append((cu + rho * np.cos(a), cv + rho * np.sin(a)))
            rings.append(ring)
        for k in range(K):  # pole fan
            a, b = rings[0][k], rings[0][(k + 1) % K]
            faces.append((pole, b, a) if cap == 0 else (pole, a, b))
        for m in range(M - 1):  # latitude bands
            lo, hi = rings[m], rings[m + 1]
            for k in range(K):
                a, b = lo[k], lo[(k + 1) % K]
                c, d_ = hi[(k + 1) % K], hi[k]
                if cap == 0:
                    faces.append((a, b, c))
                    faces.append((a, c, d_))
                else:
                    faces.append((a, c, b))
                    faces.append((a, d_, c))

    vertices = np.array(verts, dtype=np.float64)
    uv_coords = np.array(uvs, dtype=np.float64)
    faces = np.array(faces, dtype=np.int32)

    joints = [Joint(parent=j - 1, rest_translation=np.array([0.0, 0.0, 0.0 if j == 0 else L / (J - 1)]),
                    rest_rotation=np.zeros(3)) for j in range(J)]

    # hat-function weights over the joint chain: at most 2 influences per vertex
    x = vertices[:, 2] * (J - 1) / L
    weight_joints = np.full((len(vertices), 4), -1, dtype=np.int32)
    weight_values = np.zeros((len(vertices), 4), dtype=np.float64)
    for i, xi in enumerate(x):
        j0 = int(np.clip(np.floor(xi), 0, J - 2))
        t = xi - j0
        weight_joints[i, 0], weight_values[i, 0] = j0, 1.0 - t
        weight_joints[i, 1], weight_values[i, 1] = j0 + 1, t

    mesh = SkinnedMesh(vertices, faces, uv_coords, joints, weight_joints, weight_values)
    return mesh


def laplacian_smooth(mesh: SkinnedMesh, iterations: int = 20, lam: float = 0.5) -> SkinnedMesh:
    """Uniform Laplacian smoothing of the rest vertices on welded topology.

    Duplicated seam vertices move identically, preserving watertightness; the
    skeleton, weights, UVs, and faces are unchanged.
    """
    weld = mesh.weld_map()
    edges = np.unique(welded_edges(mesh.faces, weld), axis=0)
    v = mesh.vertices_rest.copy()
    for _ in range(iterations):
        acc = np.zeros_like(v)
        cnt = np.zeros(len(v))
        np.add.at(acc, edges[:, 0], v[edges[:, 1]])
        np.add.at(acc, edges[:, 1], v[edges[:, 0]])
        np.add.at(cnt, edges[:, 0], 1.0)
        np.add.at(cnt, edges[:, 1], 1.0)
        mean = acc[weld] / np.maximum(cnt[weld], 1.0)[:, None]
        v = v + lam * (mean - v)
    out = SkinnedMesh(v, mesh.faces, mesh.uv_coords, mesh.joints,
                      mesh.weight_joints, mesh.weight_values)
    return out
