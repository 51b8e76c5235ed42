"""Texture-space rasterization of posed surface normals into (temporal) normal maps."""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from .mesh import (
    MeshError,
    MotionWindow,
    SkinnedMesh,
    TwoSurfaceFrame,
    build_two_surface_frame,
    compute_vertex_normals,
)


@numba.njit(cache=True)
def _rasterize_attr(faces, uv, attrs, res, out, mask, normalize):
    """Fill texels covered by UV triangles with barycentrically interpolated
    per-vertex attributes. Texel centers at ((j+0.5)/R, (i+0.5)/R); inclusive
    edge test with first-wins face order, so every texel is independent of the
    fill schedule given the atlas is non-overlapping."""
    R = res
    for f in range(faces.shape[0]):
        ia, ib, ic = faces[f, 0], faces[f, 1], faces[f, 2]
        # texel-unit coordinates: center of texel (row i, col j) sits at (j, i)
        ax, ay = uv[ia, 0] * R - 0.5, uv[ia, 1] * R - 0.5
        bx, by = uv[ib, 0] * R - 0.5, uv[ib, 1] * R - 0.5
        cx, cy = uv[ic, 0] * R - 0.5, uv[ic, 1] * R - 0.5
        area = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
        if area == 0.0:
            continue
        s = 1.0 if area > 0.0 else -1.0
        x0 = max(0, int(np.ceil(min(ax, bx, cx))))
        x1 = min(R - 1, int(np.floor(max(ax, bx, cx))))
        y0 = max(0, int(np.ceil(min(ay, by, cy))))
        y1 = min(R - 1, int(np.floor(max(ay, by, cy))))
        for y in range(y0, y1 + 1):
            for x in range(x0, x1 + 1):
                if mask[y, x]:
                    continue
                w0 = ((bx - x) * (cy - y) - (by - y) * (cx - x)) * s
                w1 = ((cx - x) * (ay - y) - (cy - y) * (ax - x)) * s
                w2 = ((ax - x) * (by - y) - (ay - y) * (bx - x)) * s
                if w0 >= 0.0 and w1 >= 0.0 and w2 >= 0.0:
                    inv = 1.0 / (w0 + w1 + w2)
                    vx = (w0 * attrs[ia, 0] + w1 * attrs[ib, 0] + w2 * attrs[ic, 0]) * inv
                    vy = (w0 * attrs[ia, 1] + w1 * attrs[ib, 1] + w2 * attrs[ic, 1]) * inv
                    vz = (w0 * attrs[ia, 2] + w1 * attrs[ib, 2] + w2 * attrs[ic, 2]) * inv
                    if normalize:
                        n = np.sqrt(vx * vx + vy * vy + vz * vz)
                        if n > 1e-12:
                            vx, vy, vz = vx / n, vy / n, vz / n
                    out[y, x, 0] = vx
                    out[y, x, 1] = vy
                    out[y, x, 2] = vz
                    mask[y, x] = 1


def _check_resolution(resolution: int) -> None:
    if resolution < 2 or (resolution & (resolution - 1)) != 0:
        raise MeshError(f"bake resolution must be a power of two, got {resolution}")


@dataclass
class NormalMapRaster:
    values: np.ndarray  # (R, R, 3) float64
    mask: np.ndarray  # (R, R) bool

    @property
    def resolution(self) -> int:
        return self.values.shape[0]


def _dilate_once(values: np.ndarray, mask: np.ndarray):
    """Copy the renormalized mean of valid 8-neighbors into adjacent invalid texels."""
    R = mask.shape[0]
    acc = np.zeros_like(values)
    cnt = np.zeros((R, R), dtype=np.int64)
    for dy in (-1, 0, 1):
        for dx in (-1, 0, 1):
            if dy == 0 and dx == 0:
                continue
            src = np.zeros_like(values)
            msk = np.zeros((R, R), dtype=bool)
            ys = slice(max(dy, 0), R + min(dy, 0))
            yd = slice(max(-dy, 0), R + min(-dy, 0))
            xs = slice(max(dx, 0), R + min(dx, 0))
            xd = slice(max(-dx, 0), R + min(-dx, 0))
            src[yd, xd] = values[ys, xs]
            msk[yd, xd] = mask[ys, xs]
            acc += np.where(msk[..., None], src, 0.0)
            cnt += msk
    grow = (~mask) & (cnt > 0)
    mean = acc[grow] / cnt[grow][:, None]
    norm = np.linalg.norm(mean, axis=1)
    mean = mean / np.maximum(norm, 1e-12)[:, None]
    out_v = values.copy()
    out_v[grow] = mean
    return out_v, mask | grow


def bake_normal_map(frame: TwoSurfaceFrame, surface: str, resolution: int,
                    dilate: bool = False) -> NormalMapRaster:
    """Rasterize the posed per-vertex normals of one surface into the UV atlas."""
    _check_resolution(resolution)
    if surface == "inner":
        normals = frame.inner_normals
    elif surface == "outer":
        normals = frame.outer_normals()
    else:
        raise MeshError(f"surface must be 'inner' or 'outer', got {surface!r}")
    values = np.zeros((resolution, resolution, 3))
    mask = np.zeros((resolution, resolution), dtype=np.uint8)
    _rasterize_attr(frame.faces.astype(np.int32), frame.uv_coords, normals,
                    resolution, values, mask, True)
    mask = mask.astype(bool)
    if dilate:
        values, mask = _dilate_once(values, mask)
    return NormalMapRaster(values, mask)


@dataclass
class TemporalNormalMap:
    """Posed normal maps of a motion window stacked oldest-first: channels 3*(T+1)."""

    values: np.ndarray  # (R, R, 3*(T+1)) float64
    mask: np.ndarray  # (R, R) bool
    surface: str

    @property
    def resolution(self) -> int:
        return self.values.shape[0]

    @property
    def window_length(self) -> int:
        return self.values.shape[2] // 3

    def validate(self) -> None:
        for k in range(self.window_length):
            s = self.values[..., 3 * k:3 * k + 3]
            norms = np.linalg.norm(s[self.mask], axis=-1)
            if len(norms) and np.abs(norms - 1.0).max() > 1e-4:
                raise MeshError(f"slice {k}: valid texel normals not unit length")
            if np.any(s[~self.mask] != 0.0):
                raise MeshError(f"slice {k}: invalid texels not zero")


def build_temporal_normal_map(mesh: SkinnedMesh, window: MotionWindow, surface: str,
                              d: float, resolution: int, dilate: bool = False) -> TemporalNormalMap:
    """Bake one normal map per window pose (oldest first) and stack the channels."""
    _check_resolution(resolution)
    slices = []
    mask = None
    for pose in window.poses:
        frame = build_two_surface_frame(mesh, pose, d)
        raster = bake_normal_map(frame, surface, resolution, dilate=dilate)
        slices.append(raster.values)
        if mask is None:
            mask = raster.mask
    values = np.concatenate(slices, axis=2)
    values[~mask] = 0.0
    return TemporalNormalMap(values, mask, surface)
