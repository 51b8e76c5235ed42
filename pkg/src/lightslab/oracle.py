"""Ground-truth renderer: textured z-buffer rasterization of the posed inner mesh.

Deliberately shares no intersection, sampling, or shading code with the raycast
and neural modules: geometry is projected and scan-converted in screen space with
perspective-correct barycentrics, and textures are evaluated analytically.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numba
import numpy as np

from .raycast import Camera


@dataclass
class TextureSpec:
    pattern: str = "checker"  # checker | stripes | constant
    scale: float = 12.0
    color_a: tuple = (0.85, 0.25, 0.2)
    color_b: tuple = (0.15, 0.5, 0.85)
    constant: tuple = (0.6, 0.6, 0.6)

    def to_dict(self):
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in self.__dict__.items()}

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        for k in ("color_a", "color_b", "constant"):
            if k in d:
                d[k] = tuple(d[k])
        return cls(**d)


@dataclass
class ShadingSpec:
    enabled: bool = True
    light_dir: tuple = (0.45, 0.35, 0.82)  # towards the light, normalized on use
    ambient: float = 0.35
    diffuse: float = 0.65
    specular: float = 0.5  # Blinn-Phong; view-dependent appearance
    shininess: float = 24.0

    def to_dict(self):
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in self.__dict__.items()}

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if "light_dir" in d:
            d["light_dir"] = tuple(d["light_dir"])
        return cls(**d)


@numba.njit(cache=True)
def _raster_kernel(pts, faces, width, height, near, face_id, bary, zbuf):
    """Screen-space scan conversion with a z-buffer.

    pts rows are (u_px, v_px, z_cam); bary receives perspective-correct weights.
    """
    for f in range(faces.shape[0]):
        ia, ib, ic = faces[f, 0], faces[f, 1], faces[f, 2]
        za, zb, zc = pts[ia, 2], pts[ib, 2], pts[ic, 2]
        if za <= near or zb <= near or zc <= near:
            continue
        ax, ay = pts[ia, 0], pts[ia, 1]
        bx, by = pts[ib, 0], pts[ib, 1]
        cx, cy = pts[ic, 0], pts[ic, 1]
        area = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
        if area == 0.0:
            continue
        s = 1.0 if area > 0.0 else -1.0
        x0 = max(0, int(np.ceil(min(ax, bx, cx) - 0.5)))
        x1 = min(width - 1, int(np.floor(max(ax, bx, cx) - 0.5)))
        y0 = max(0, int(np.ceil(min(ay, by, cy) - 0.5)))
        y1 = min(height - 1, int(np.floor(max(ay, by, cy) - 0.5)))
        inv_a, inv_b, inv_c = 1.0 / za, 1.0 / zb, 1.0 / zc
        for y in range(y0, y1 + 1):
            py = y + 0.5
            for x in range(x0, x1 + 1):
                px = x + 0.5
                w0 = ((bx - px) * (cy - py) - (by - py) * (cx - px)) * s
                w1 = ((cx - px) * (ay - py) - (cy - py) * (ax - px)) * s
                w2 = ((ax - px) * (by - py) - (ay - py) * (bx - px)) * s
                if w0 < 0.0 or w1 < 0.0 or w2 < 0.0:
                    continue
                tot = w0 + w1 + w2
                if tot <= 0.0:
                    continue
                l0, l1, l2 = w0 / tot, w1 / tot, w2 / tot
                denom = l0 * inv_a + l1 * inv_b + l2 * inv_c
                z = 1.0 / denom
                if z < zbuf[y, x]:
                    zbuf[y, x] = z
                    face_id[y, x] = f
                    bary[y, x, 0] = l0 * inv_a * z
                    bary[y, x, 1] = l1 * inv_b * z
                    bary[y, x, 2] = l2 * inv_c * z


def evaluate_texture(spec: TextureSpec, uv: np.ndarray) -> np.ndarray:
    """Analytic procedural texture at uv rows; returns (..., 3) colors."""
    u, v = uv[..., 0], uv[..., 1]
    if spec.pattern == "constant":
        return np.broadcast_to(np.asarray(spec.constant), uv.shape[:-1] + (3,)).copy()
    if spec.pattern == "checker":
        cell = (np.floor(u * spec.scale) + np.floor(v * spec.scale)) % 2
    elif spec.pattern == "stripes":
        cell = np.floor(u * spec.scale) % 2
    else:
        raise ValueError(f"unknown texture pattern {spec.pattern!r}")
    ca = np.asarray(spec.color_a)
    cb = np.asarray(spec.color_b)
    return np.where(cell[..., None] == 0, ca, cb)


def oracle_render(mesh, posed_vertices: np.ndarray, camera: Camera,
                  texture: TextureSpec, shading: ShadingSpec = None,
                  background=(0.2, 0.2, 0.2)) -> np.ndarray:
    """Rasterize the posed inner mesh with analytic texture and Blinn-Phong shading.

    Returns an (H, W, 3) float64 image in [0, 1].
    """
    shading = shading or ShadingSpec(enabled=False)
    H, W = camera.height, camera.width
    u, v, z = camera.project(posed_vertices)
    pts = np.stack([u, v, z], axis=1)

    face_id = np.full((H, W), -1, dtype=np.int32)
    bary = np.zeros((H, W, 3))
    zbuf = np.full((H, W), np.inf)
    _raster_kernel(pts, mesh.faces.astype(np.int32), W, H, 1e-3, face_id, bary, zbuf)

    image = np.empty((H, W, 3))
    image[:] = np.asarray(background, dtype=np.float64)
    fg = face_id >= 0
    if not np.any(fg):
        return image

    fids = face_id[fg]
    lam = bary[fg]  # (P,3)
    corners = mesh.faces[fids]  # (P,3)
    uv_px = np.einsum("pk,pkc->pc", lam, mesh.uv_coords[corners])
    base = evaluate_texture(texture, uv_px)

    if shading.enabled:
        # smooth normals from the posed geometry, its own accumulation path
        from .mesh import compute_vertex_normals

        vn = compute_vertex_normals(posed_vertices, mesh.faces)
        n_px = np.einsum("pk,pkc->pc", lam, vn[corners])
        n_px /= np.linalg.norm(n_px, axis=1, keepdims=True)
        p_px = np.einsum("pk,pkc->pc", lam, posed_vertices[corners])
        l = np.asarray(shading.light_dir, dtype=np.float64)
        l = l / np.linalg.norm(l)
        view = camera.center() - p_px
        view /= np.linalg.norm(view, axis=1, keepdims=True)
        half = l + view
        half /= np.linalg.norm(half, axis=1, keepdims=True)
        ndl = np.maximum(np.einsum("pc,c->p", n_px, l), 0.0)
        ndh = np.maximum(np.einsum("pc,pc->p", n_px, half), 0.0)
        color = base * (shading.ambient + shading.diffuse * ndl)[:, None]
        color = color + shading.specular * (ndh ** shading.shininess)[:, None]
    else:
        color = base
    image[fg] = np.clip(color, 0.0, 1.0)
    return image
