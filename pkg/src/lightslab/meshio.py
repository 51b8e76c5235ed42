"""Mesh interchange: restricted OBJ subset plus a skeleton/weights JSON sidecar.

OBJ subset: `v`, `vt`, and `f` with v/vt index pairs, exactly one UV per vertex
(vt index always equals v index). Sidecar schema:
{"joints": [{"parent", "rest_translation", "rest_rotation"}], "weights": [[{"joint", "w"}...]...]}
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .mesh import Joint, MeshError, SkinnedMesh


def save_obj(mesh: SkinnedMesh, path) -> None:
    lines = []
    for p in mesh.vertices_rest:
        lines.append(f"v {p[0]:.17g} {p[1]:.17g} {p[2]:.17g}")
    for t in mesh.uv_coords:
        lines.append(f"vt {t[0]:.17g} {t[1]:.17g}")
    for f in mesh.faces:
        lines.append("f " + " ".join(f"{i + 1}/{i + 1}" for i in f))
    Path(path).write_text("\n".join(lines) + "\n")


def load_obj(path):
    """Parse the restricted OBJ subset; returns (vertices, uv_coords, faces)."""
    verts, uvs, faces = [], [], []
    for ln, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if parts[0] == "v":
            verts.append([float(x) for x in parts[1:4]])
        elif parts[0] == "vt":
            uvs.append([float(x) for x in parts[1:3]])
        elif parts[0] == "f":
            idx = []
            for tok in parts[1:]:
                vi, _, ti = tok.partition("/")
                if not ti or "/" in ti:
                    raise MeshError(f"{path}:{ln}: face tokens must be v/vt")
                if vi != ti:
                    raise MeshError(f"{path}:{ln}: one UV per vertex required (v index != vt index)")
                idx.append(int(vi) - 1)
            if len(idx) != 3:
                raise MeshError(f"{path}:{ln}: only triangles supported")
            faces.append(idx)
        else:
            raise MeshError(f"{path}:{ln}: unsupported OBJ element '{parts[0]}'")
    v = np.array(verts, dtype=np.float64)
    t = np.array(uvs, dtype=np.float64)
    if len(v) != len(t):
        raise MeshError(f"{path}: vertex/uv count mismatch ({len(v)} vs {len(t)})")
    return v, t, np.array(faces, dtype=np.int32)


def save_skeleton(mesh: SkinnedMesh, path) -> None:
    weights = []
    for wj, wv in zip(mesh.weight_joints, mesh.weight_values):
        weights.append([{"joint": int(j), "w": float(w)} for j, w in zip(wj, wv) if j >= 0])
    doc = {
        "joints": [
            {
                "parent": j.parent,
                "rest_translation": [float(x) for x in j.rest_translation],
                "rest_rotation": [float(x) for x in j.rest_rotation],
            }
            for j in mesh.joints
        ],
        "weights": weights,
    }
    Path(path).write_text(json.dumps(doc, indent=1))


def load_skeleton(path):
    doc = json.loads(Path(path).read_text())
    joints = [
        Joint(int(j["parent"]), np.array(j["rest_translation"], dtype=np.float64),
              np.array(j["rest_rotation"], dtype=np.float64))
        for j in doc["joints"]
    ]
    n = len(doc["weights"])
    weight_joints = np.full((n, 4), -1, dtype=np.int32)
    weight_values = np.zeros((n, 4), dtype=np.float64)
    for i, entries in enumerate(doc["weights"]):
        if len(entries) > 4:
            raise MeshError(f"vertex {i}: more than 4 skin weights")
        for s, e in enumerate(entries):
            weight_joints[i, s] = e["joint"]
            weight_values[i, s] = e["w"]
    return joints, weight_joints, weight_values


def save_mesh(mesh: SkinnedMesh, obj_path, sidecar_path=None) -> None:
    save_obj(mesh, obj_path)
    if sidecar_path is None:
        sidecar_path = Path(obj_path).with_suffix(".skel.json")
    save_skeleton(mesh, sidecar_path)


def load_mesh(obj_path, sidecar_path=None) -> SkinnedMesh:
    if sidecar_path is None:
        sidecar_path = Path(obj_path).with_suffix(".skel.json")
    v, t, f = load_obj(obj_path)
    joints, wj, wv = load_skeleton(sidecar_path)
    if len(wv) != len(v):
        raise MeshError(f"{sidecar_path}: weight rows ({len(wv)}) != vertex count ({len(v)})")
    return SkinnedMesh(v, f, t, joints, wj, wv)
