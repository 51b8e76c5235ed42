"""Camera rays, BVH-accelerated two-surface intersection, and screen-space UV maps."""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numba
import numpy as np

from .mesh import MeshError, TwoSurfaceFrame

KIND_BACKGROUND = 0
KIND_BOTH = 1
KIND_PEELED = 2

KIND_NAMES = {KIND_BACKGROUND: "background", KIND_BOTH: "both", KIND_PEELED: "peeled_outer"}


class RaycastError(Exception):
    pass


# ---------------------------------------------------------------------------
# camera


@dataclass
class Camera:
    """Pinhole camera; extrinsics map world to camera (x right, y down, z forward)."""

    fx: float
    fy: float
    cx: float
    cy: float
    rotation: np.ndarray  # (3,3) world-to-camera
    translation: np.ndarray  # (3,)
    width: int
    height: int

    def __post_init__(self):
        self.rotation = np.asarray(self.rotation, dtype=np.float64)
        self.translation = np.asarray(self.translation, dtype=np.float64)
        if self.fx <= 0 or self.fy <= 0:
            raise RaycastError("focal lengths must be positive")

    def center(self) -> np.ndarray:
        return -self.rotation.T @ self.translation

    def ray_directions(self) -> np.ndarray:
        """Unit world-space direction through every pixel center, shape (H, W, 3)."""
        cols, rows = np.meshgrid(np.arange(self.width), np.arange(self.height))
        x = (cols + 0.5 - self.cx) / self.fx
        y = (rows + 0.5 - self.cy) / self.fy
        d_cam = np.stack([x, y, np.ones_like(x)], axis=-1)
        d_world = d_cam @ self.rotation  # R^T applied row-wise
        return d_world / np.linalg.norm(d_world, axis=-1, keepdims=True)

    def project(self, points: np.ndarray):
        """Project world points; returns (u_px, v_px, z_cam)."""
        p = np.asarray(points, dtype=np.float64) @ self.rotation.T + self.translation
        z = p[..., 2]
        return self.fx * p[..., 0] / z + self.cx, self.fy * p[..., 1] / z + self.cy, z

    def to_dict(self) -> dict:
        return {
            "fx": self.fx, "fy": self.fy, "cx": self.cx, "cy": self.cy,
            "rotation": self.rotation.tolist(), "translation": self.translation.tolist(),
            "width": self.width, "height": self.height,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Camera":
        return cls(d["fx"], d["fy"], d["cx"], d["cy"], np.array(d["rotation"]),
                   np.array(d["translation"]), d["width"], d["height"])


def generate_ray(camera: Camera, pixel):
    """Ray through the center of pixel (row, col); returns (origin, unit direction)."""
    row, col = pixel
    if not (0 <= row < camera.height and 0 <= col < camera.width):
        raise RaycastError(f"pixel {pixel} outside resolution {camera.width}x{camera.height}")
    d_cam = np.array([(col + 0.5 - camera.cx) / camera.fx,
                      (row + 0.5 - camera.cy) / camera.fy, 1.0])
    d = camera.rotation.T @ d_cam
    return camera.center(), d / np.linalg.norm(d)


def look_at_camera(center, target, fov_y: float, width: int, height: int,
                   up=(0.0, 0.0, 1.0)) -> Camera:
    """Camera at `center` looking at `target`; fov_y in radians, principal point centered."""
    center = np.asarray(center, dtype=np.float64)
    forward = np.asarray(target, dtype=np.float64) - center
    forward = forward / np.linalg.norm(forward)
    upv = np.asarray(up, dtype=np.float64)
    right = np.cross(forward, upv)
    n = np.linalg.norm(right)
    if n < 1e-9:  # looking straight along up: pick an arbitrary right axis
        right = np.cross(forward, np.array([1.0, 0.0, 0.0]))
        n = np.linalg.norm(right)
    right /= n
    down = np.cross(forward, right)
    R = np.stack([right, down, forward])
    t = -R @ center
    f = height / (2.0 * np.tan(fov_y / 2.0))
    return Camera(f, f, width / 2.0, height / 2.0, R, t, width, height)


def orbit_camera(azimuth: float, elevation: float, radius: float, look_at,
                 fov_y: float, width: int, height: int) -> Camera:
    """Ring camera around `look_at`: azimuth/elevation in radians, radius in meters."""
    la = np.asarray(look_at, dtype=np.float64)
    ce, se = np.cos(elevation), np.sin(elevation)
    center = la + radius * np.array([ce * np.cos(azimuth), ce * np.sin(azimuth), se])
    return look_at_camera(center, la, fov_y, width, height)


# ---------------------------------------------------------------------------
# BVH


@dataclass
class BVH:
    """Flat binary BVH over triangles, leaves hold ranges of a reordered face list."""

    node_min: np.ndarray  # (M,3)
    node_max: np.ndarray  # (M,3)
    node_child: np.ndarray  # (M,2) int32; child[0] == -1 marks a leaf
    node_range: np.ndarray  # (M,2) int32 leaf [start, end)
    order: np.ndarray  # (F,) int32 original face index per reordered slot
    tri_a: np.ndarray  # (F,3) reordered triangle corners
    tri_b: np.ndarray
    tri_c: np.ndarray
    uv_a: np.ndarray = field(default=None)  # (F,2) per-corner UVs, optional
    uv_b: np.ndarray = field(default=None)
    uv_c: np.ndarray = field(default=None)

    @property
    def n_faces(self) -> int:
        return len(self.order)


def build_bvh(vertices: np.ndarray, faces: np.ndarray, uv_coords: np.ndarray = None,
              leaf_size: int = 4) -> BVH:
    """Median-split BVH; every face referenced exactly once."""
    if len(faces) < 1:
        raise RaycastError("need at least one face")
    v = np.asarray(vertices, dtype=np.float64)
    f = np.asarray(faces, dtype=np.int64)
    tri = v[f]  # (F,3,3)
    lo_f, hi_f = tri.min(axis=1), tri.max(axis=1)
    centroid = tri.mean(axis=1)

    order = np.arange(len(f))
    node_min, node_max, node_child, node_range = [], [], [], []

    # (slot index, face range) work stack; children are patched after allocation
    stack = [(-1, 0, 0, len(f))]  # parent slot, which child, start, end
    while stack:
        parent, which, start, end = stack.pop()
        idx = order[start:end]
        me = len(node_min)
        node_min.append(lo_f[idx].min(axis=0))
        node_max.append(hi_f[idx].max(axis=0))
        node_child.append([-1, -1])
        node_range.append([start, end])
        if parent >= 0:
            node_child[parent][which] = me
        count = end - start
        if count <= leaf_size:
            continue
        cen = centroid[idx]
        axis = int(np.argmax(cen.max(axis=0) - cen.min(axis=0)))
        mid = count // 2
        part = np.argpartition(cen[:, axis], mid)
        order[start:end] = idx[part]
        node_range[me] = [0, 0]  # internal
        stack.append((me, 1, start + mid, end))
        stack.append((me, 0, start, start + mid))

    node_child = np.array(node_child, dtype=np.int32)
    node_range = np.array(node_range, dtype=np.int32)
    # mark leaves: child[0] == -1 already; internals got patched except ranges zeroed
    tri_o = tri[order]
    bvh = BVH(
        np.array(node_min), np.array(node_max), node_child, node_range,
        order.astype(np.int32), np.ascontiguousarray(tri_o[:, 0]),
        np.ascontiguousarray(tri_o[:, 1]), np.ascontiguousarray(tri_o[:, 2]),
    )
    if uv_coords is not None:
        uvf = np.asarray(uv_coords, dtype=np.float64)[f][order]
        bvh.uv_a = np.ascontiguousarray(uvf[:, 0])
        bvh.uv_b = np.ascontiguousarray(uvf[:, 1])
        bvh.uv_c = np.ascontiguousarray(uvf[:, 2])
    return bvh


@numba.njit(cache=True, inline="always")
def _safe_inv(x):
    if x > 1e-300 or x < -1e-300:
        return 1.0 / x
    return 1e300 if x >= 0.0 else -1e300


@numba.njit(cache=True)
def _collect_hits(node_min, node_max, node_child, node_range,
                  tri_a, tri_b, tri_c, ox, oy, oz, dx, dy, dz, tmin,
                  nearest_only, hit_t, hit_f, hit_u, hit_v):
    """Watertight ray/triangle intersection over the BVH.

    Returns the hit count (capped at the output array length). With nearest_only,
    only the closest hit is kept in slot 0.
    """
    # watertight setup: shear so the ray points along +z of a permuted frame
    d = np.empty(3)
    d[0], d[1], d[2] = dx, dy, dz
    o = np.empty(3)
    o[0], o[1], o[2] = ox, oy, oz
    adx, ady, adz = abs(dx), abs(dy), abs(dz)
    if adz >= adx and adz >= ady:
        kz = 2
    elif ady >= adx:
        kz = 1
    else:
        kz = 0
    kx = kz + 1
    if kx == 3:
        kx = 0
    ky = kx + 1
    if ky == 3:
        ky = 0
    if d[kz] < 0.0:
        kx, ky = ky, kx
    Sz = 1.0 / d[kz]
    Sx = d[kx] * Sz
    Sy = d[ky] * Sz

    inv_x = _safe_inv(dx)
    inv_y = _safe_inv(dy)
    inv_z = _safe_inv(dz)

    cap = hit_t.shape[0]
    n_hits = 0
    best = np.inf

    stack = np.empty(128, dtype=np.int32)
    sp = 0
    stack[sp] = 0
    sp += 1
    while sp > 0:
        sp -= 1
        node = stack[sp]
        # slab test
        t0x = (node_min[node, 0] - ox) * inv_x
        t1x = (node_max[node, 0] - ox) * inv_x
        if t0x > t1x:
            t0x, t1x = t1x, t0x
        t0y = (node_min[node, 1] - oy) * inv_y
        t1y = (node_max[node, 1] - oy) * inv_y
        if t0y > t1y:
            t0y, t1y = t1y, t0y
        t0z = (node_min[node, 2] - oz) * inv_z
        t1z = (node_max[node, 2] - oz) * inv_z
        if t0z > t1z:
            t0z, t1z = t1z, t0z
        t_enter = max(t0x, max(t0y, t0z))
        t_exit = min(t1x, min(t1y, t1z))
        if t_enter > t_exit or t_exit < tmin:
            continue
        if nearest_only and t_enter > best:
            continue
        if node_child[node, 0] < 0:
            for i in range(node_range[node, 0], node_range[node, 1]):
                # translate and shear the triangle into ray space
                Akz = tri_a[i, kz] - o[kz]
                Bkz = tri_b[i, kz] - o[kz]
                Ckz = tri_c[i, kz] - o[kz]
                Ax = tri_a[i, kx] - o[kx] - Sx * Akz
                Ay = tri_a[i, ky] - o[ky] - Sy * Akz
                Bx = tri_b[i, kx] - o[kx] - Sx * Bkz
                By = tri_b[i, ky] - o[ky] - Sy * Bkz
                Cx = tri_c[i, kx] - o[kx] - Sx * Ckz
                Cy = tri_c[i, ky] - o[ky] - Sy * Ckz
                U = Cx * By - Cy * Bx
                V = Ax * Cy - Ay * Cx
                W = Bx * Ay - By * Ax
                if (U < 0.0 or V < 0.0 or W < 0.0) and (U > 0.0 or V > 0.0 or W > 0.0):
                    continue
                det = U + V + W
                if det == 0.0:
                    continue
                T = U * Sz * Akz + V * Sz * Bkz + W * Sz * Ckz
                t = T / det
                if t <= tmin:
                    continue
                if nearest_only:
                    if t < best:
                        best = t
                        hit_t[0] = t
                        hit_f[0] = i
                        hit_u[0] = U / det
                        hit_v[0] = V / det
                        n_hits = 1
                elif n_hits < cap:
                    hit_t[n_hits] = t
                    hit_f[n_hits] = i
                    hit_u[n_hits] = U / det
                    hit_v[n_hits] = V / det
                    n_hits += 1
        else:
            if sp + 2 <= 128:
                stack[sp] = node_child[node, 0]
                stack[sp + 1] = node_child[node, 1]
                sp += 2
    return n_hits


@numba.njit(cache=True)
def _sort_dedupe(n, hit_t, hit_f, hit_u, hit_v):
    """Insertion-sort hits by t and drop duplicates from shared-edge double hits."""
    for i in range(1, n):
        t, f, u, v = hit_t[i], hit_f[i], hit_u[i], hit_v[i]
        j = i - 1
        while j >= 0 and hit_t[j] > t:
            hit_t[j + 1] = hit_t[j]
            hit_f[j + 1] = hit_f[j]
            hit_u[j + 1] = hit_u[j]
            hit_v[j + 1] = hit_v[j]
            j -= 1
        hit_t[j + 1] = t
        hit_f[j + 1] = f
        hit_u[j + 1] = u
        hit_v[j + 1] = v
    m = 0
    for i in range(n):
        if m > 0 and hit_t[i] - hit_t[m - 1] <= 1e-10 * max(1.0, abs(hit_t[i])):
            continue
        hit_t[m] = hit_t[i]
        hit_f[m] = hit_f[i]
        hit_u[m] = hit_u[i]
        hit_v[m] = hit_v[i]
        m += 1
    return m


@numba.njit(cache=True)
def _render_kernel(o, dirs,
                   o_node_min, o_node_max, o_node_child, o_node_range,
                   o_tri_a, o_tri_b, o_tri_c, o_uva, o_uvb, o_uvc,
                   i_node_min, i_node_max, i_node_child, i_node_range,
                   i_tri_a, i_tri_b, i_tri_c, i_uva, i_uvb, i_uvc,
                   tmin, kind, w_out, w_inner, t_out, t_inner, face_out, face_inner):
    n = dirs.shape[0]
    hit_t = np.empty(64)
    hit_f = np.empty(64, dtype=np.int64)
    hit_u = np.empty(64)
    hit_v = np.empty(64)
    one = np.empty(1)
    one_f = np.empty(1, dtype=np.int64)
    one_u = np.empty(1)
    one_v = np.empty(1)
    for p in range(n):
        dx, dy, dz = dirs[p, 0], dirs[p, 1], dirs[p, 2]
        n_out = _collect_hits(o_node_min, o_node_max, o_node_child, o_node_range,
                              o_tri_a, o_tri_b, o_tri_c, o[0], o[1], o[2],
                              dx, dy, dz, tmin, False, hit_t, hit_f, hit_u, hit_v)
        n_out = _sort_dedupe(n_out, hit_t, hit_f, hit_u, hit_v)
        if n_out == 0:
            kind[p] = 0
            continue
        n_in = _collect_hits(i_node_min, i_node_max, i_node_child, i_node_range,
                             i_tri_a, i_tri_b, i_tri_c, o[0], o[1], o[2],
                             dx, dy, dz, tmin, True, one, one_f, one_u, one_v)
        fo = hit_f[0]
        bu, bv = hit_u[0], hit_v[0]
        bw = 1.0 - bu - bv
        if n_in > 0:
            kind[p] = 1
            w_out[p, 0] = bu * o_uva[fo, 0] + bv * o_uvb[fo, 0] + bw * o_uvc[fo, 0]
            w_out[p, 1] = bu * o_uva[fo, 1] + bv * o_uvb[fo, 1] + bw * o_uvc[fo, 1]
            fi = one_f[0]
            cu, cv = one_u[0], one_v[0]
            cw = 1.0 - cu - cv
            w_inner[p, 0] = cu * i_uva[fi, 0] + cv * i_uvb[fi, 0] + cw * i_uvc[fi, 0]
            w_inner[p, 1] = cu * i_uva[fi, 1] + cv * i_uvb[fi, 1] + cw * i_uvc[fi, 1]
            t_out[p] = hit_t[0]
            t_inner[p] = one[0]
            face_out[p] = fo
            face_inner[p] = fi
        elif n_out >= 2:
            kind[p] = 2
            f2 = hit_f[1]
            eu, ev = hit_u[1], hit_v[1]
            ew = 1.0 - eu - ev
            w_out[p, 0] = bu * o_uva[fo, 0] + bv * o_uvb[fo, 0] + bw * o_uvc[fo, 0]
            w_out[p, 1] = bu * o_uva[fo, 1] + bv * o_uvb[fo, 1] + bw * o_uvc[fo, 1]
            w_inner[p, 0] = eu * o_uva[f2, 0] + ev * o_uvb[f2, 0] + ew * o_uvc[f2, 0]
            w_inner[p, 1] = eu * o_uva[f2, 1] + ev * o_uvb[f2, 1] + ew * o_uvc[f2, 1]
            t_out[p] = hit_t[0]
            t_inner[p] = hit_t[1]
            face_out[p] = fo
            face_inner[p] = f2
        else:
            kind[p] = 0  # grazing tangency: single outer hit, no inner


# ---------------------------------------------------------------------------
# hit records and screen maps


@dataclass
class SurfaceHitRecord:
    pixel: tuple
    kind: str  # "both" | "peeled_outer" | "background"
    w_out: np.ndarray = None
    w_inner: np.ndarray = None
    t_out: float = None
    t_inner: float = None
    face_out: int = None  # original face index
    face_inner: int = None


@dataclass
class ScreenUVMaps:
    kind: np.ndarray  # (H,W) uint8, KIND_* codes
    w_out: np.ndarray  # (H,W,2) float64
    w_inner: np.ndarray  # (H,W,2) float64
    t_out: np.ndarray = None  # (H,W) float64, inf where absent
    t_inner: np.ndarray = None
    face_out: np.ndarray = None  # (H,W) int32 reordered->original resolved
    face_inner: np.ndarray = None

    @property
    def shape(self):
        return self.kind.shape

    def foreground_count(self) -> int:
        return int(np.sum(self.kind != KIND_BACKGROUND))


def nearest_hit(bvh: BVH, origin, direction, tmin: float = 1e-9):
    """Nearest watertight hit; returns (t, original_face, bary_a, bary_b) or None."""
    one = np.empty(1)
    one_f = np.empty(1, dtype=np.int64)
    one_u = np.empty(1)
    one_v = np.empty(1)
    o = np.asarray(origin, dtype=np.float64)
    d = np.asarray(direction, dtype=np.float64)
    n = _collect_hits(bvh.node_min, bvh.node_max, bvh.node_child, bvh.node_range,
                      bvh.tri_a, bvh.tri_b, bvh.tri_c, o[0], o[1], o[2],
                      d[0], d[1], d[2], tmin, True, one, one_f, one_u, one_v)
    if n == 0:
        return None
    return float(one[0]), int(bvh.order[one_f[0]]), float(one_u[0]), float(one_v[0])


def all_hits(bvh: BVH, origin, direction, tmin: float = 1e-9):
    """All watertight hits sorted by t, shared-edge duplicates removed.

    Returns (t array, original face array, bary_a, bary_b)."""
    hit_t = np.empty(64)
    hit_f = np.empty(64, dtype=np.int64)
    hit_u = np.empty(64)
    hit_v = np.empty(64)
    o = np.asarray(origin, dtype=np.float64)
    d = np.asarray(direction, dtype=np.float64)
    n = _collect_hits(bvh.node_min, bvh.node_max, bvh.node_child, bvh.node_range,
                      bvh.tri_a, bvh.tri_b, bvh.tri_c, o[0], o[1], o[2],
                      d[0], d[1], d[2], tmin, False, hit_t, hit_f, hit_u, hit_v)
    n = _sort_dedupe(n, hit_t, hit_f, hit_u, hit_v)
    return hit_t[:n].copy(), bvh.order[hit_f[:n]].copy(), hit_u[:n].copy(), hit_v[:n].copy()


def point_outside_surface(point, bvh: BVH) -> bool:
    """Parity test: a point is outside a watertight surface iff a ray from it
    crosses the surface an even number of times."""
    direction = np.array([0.537702, 0.832309, 0.134447])
    direction /= np.linalg.norm(direction)
    t, _, _, _ = all_hits(bvh, point, direction, tmin=0.0)
    return len(t) % 2 == 0


def _require_uvs(bvh: BVH):
    if bvh.uv_a is None:
        raise RaycastError("BVH was built without uv_coords")


def intersect_two_surface(ray, frame: TwoSurfaceFrame = None, bvh_inner: BVH = None,
                          bvh_outer: BVH = None, pixel=(0, 0)) -> SurfaceHitRecord:
    """Classify a single ray (origin, direction) against the two-surface frame.

    The BVHs carry the reordered geometry and shared UV atlas; they are built
    from `frame` when not supplied.
    """
    if bvh_inner is None or bvh_outer is None:
        bvh_inner, bvh_outer = build_frame_bvhs(frame)
    _require_uvs(bvh_inner)
    _require_uvs(bvh_outer)
    origin, direction = ray
    o = np.asarray(origin, dtype=np.float64)
    dirs = np.asarray(direction, dtype=np.float64).reshape(1, 3)
    kind = np.zeros(1, dtype=np.uint8)
    w_out = np.zeros((1, 2))
    w_inner = np.zeros((1, 2))
    t_out = np.full(1, np.inf)
    t_inner = np.full(1, np.inf)
    face_out = np.full(1, -1, dtype=np.int64)
    face_inner = np.full(1, -1, dtype=np.int64)
    _render_kernel(o, dirs,
                   bvh_outer.node_min, bvh_outer.node_max, bvh_outer.node_child,
                   bvh_outer.node_range, bvh_outer.tri_a, bvh_outer.tri_b, bvh_outer.tri_c,
                   bvh_outer.uv_a, bvh_outer.uv_b, bvh_outer.uv_c,
                   bvh_inner.node_min, bvh_inner.node_max, bvh_inner.node_child,
                   bvh_inner.node_range, bvh_inner.tri_a, bvh_inner.tri_b, bvh_inner.tri_c,
                   bvh_inner.uv_a, bvh_inner.uv_b, bvh_inner.uv_c,
                   1e-9, kind, w_out, w_inner, t_out, t_inner, face_out, face_inner)
    k = int(kind[0])
    if k == KIND_BACKGROUND:
        return SurfaceHitRecord(pixel, "background")
    inner_bvh_for_face = bvh_inner if k == KIND_BOTH else bvh_outer
    return SurfaceHitRecord(
        pixel, KIND_NAMES[k], w_out[0].copy(), w_inner[0].copy(),
        float(t_out[0]), float(t_inner[0]),
        int(bvh_outer.order[face_out[0]]), int(inner_bvh_for_face.order[face_inner[0]]),
    )


def build_frame_bvhs(frame: TwoSurfaceFrame):
    """(inner, outer) BVHs carrying the shared UV atlas."""
    inner = build_bvh(frame.inner_vertices, frame.faces, frame.uv_coords)
    outer = build_bvh(frame.outer_vertices, frame.faces, frame.uv_coords)
    return inner, outer


def render_uv_maps(camera: Camera, frame: TwoSurfaceFrame, bvh_inner: BVH = None,
                   bvh_outer: BVH = None, check_camera: bool = True) -> ScreenUVMaps:
    """Per-pixel two-surface intersection over the full camera frame."""
    if bvh_inner is None or bvh_outer is None:
        bvh_inner, bvh_outer = build_frame_bvhs(frame)
    _require_uvs(bvh_inner)
    _require_uvs(bvh_outer)
    if check_camera and not point_outside_surface(camera.center(), bvh_outer):
        raise RaycastError("camera center lies inside the outer surface")
    H, W = camera.height, camera.width
    dirs = camera.ray_directions().reshape(-1, 3)
    o = camera.center()
    n = H * W
    kind = np.zeros(n, dtype=np.uint8)
    w_out = np.zeros((n, 2))
    w_inner = np.zeros((n, 2))
    t_out = np.full(n, np.inf)
    t_inner = np.full(n, np.inf)
    face_out = np.full(n, -1, dtype=np.int64)
    face_inner = np.full(n, -1, dtype=np.int64)
    _render_kernel(o, np.ascontiguousarray(dirs),
                   bvh_outer.node_min, bvh_outer.node_max, bvh_outer.node_child,
                   bvh_outer.node_range, bvh_outer.tri_a, bvh_outer.tri_b, bvh_outer.tri_c,
                   bvh_outer.uv_a, bvh_outer.uv_b, bvh_outer.uv_c,
                   bvh_inner.node_min, bvh_inner.node_max, bvh_inner.node_child,
                   bvh_inner.node_range, bvh_inner.tri_a, bvh_inner.tri_b, bvh_inner.tri_c,
                   bvh_inner.uv_a, bvh_inner.uv_b, bvh_inner.uv_c,
                   1e-9, kind, w_out, w_inner, t_out, t_inner, face_out, face_inner)
    # resolve reordered face slots back to original indices
    fo = np.where(face_out >= 0, bvh_outer.order[np.maximum(face_out, 0)], -1)
    fi = np.where(kind == KIND_BOTH, bvh_inner.order[np.maximum(face_inner, 0)],
                  np.where(kind == KIND_PEELED, bvh_outer.order[np.maximum(face_inner, 0)], -1))
    return ScreenUVMaps(
        kind.reshape(H, W), w_out.reshape(H, W, 2), w_inner.reshape(H, W, 2),
        t_out.reshape(H, W), t_inner.reshape(H, W),
        fo.astype(np.int32).reshape(H, W), fi.astype(np.int32).reshape(H, W),
    )


# ---------------------------------------------------------------------------
# SUVM serialization (training-time cache format)

_SUVM_MAGIC = b"SUVM"
_SUVM_PIXEL = np.dtype([("kind", "u1"), ("w_out", "<f4", 2), ("w_inner", "<f4", 2)])


def save_uv_maps(maps: ScreenUVMaps, path) -> None:
    H, W = maps.shape
    rec = np.zeros(H * W, dtype=_SUVM_PIXEL)
    rec["kind"] = maps.kind.reshape(-1)
    rec["w_out"] = maps.w_out.reshape(-1, 2).astype("<f4")
    rec["w_inner"] = maps.w_inner.reshape(-1, 2).astype("<f4")
    with open(path, "wb") as fh:
        fh.write(_SUVM_MAGIC)
        fh.write(struct.pack("<II", W, H))
        fh.write(rec.tobytes())


def load_uv_maps(path) -> ScreenUVMaps:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _SUVM_MAGIC:
            raise RaycastError(f"{path}: bad magic {magic!r}")
        W, H = struct.unpack("<II", fh.read(8))
        rec = np.frombuffer(fh.read(H * W * _SUVM_PIXEL.itemsize), dtype=_SUVM_PIXEL)
    return ScreenUVMaps(
        rec["kind"].reshape(H, W).copy(),
        rec["w_out"].astype(np.float64).reshape(H, W, 2),
        rec["w_inner"].astype(np.float64).reshape(H, W, 2),
    )
