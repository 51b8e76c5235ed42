"""Synthetic multi-view dataset: scene configuration, oracle-rendered targets,
and the directory-backed loader used by training and evaluation."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .mesh import CharacterConfig, MotionWindow, SkeletalPose, build_test_character, laplacian_smooth, pose_mesh
from .oracle import ShadingSpec, TextureSpec, oracle_render
from .raycast import Camera, look_at_camera


class DatasetError(Exception):
    pass


@dataclass
class MotionScript:
    """Procedural joint-angle curves: sinusoids per joint with distinct periods."""

    amplitude: float = 0.55  # radians
    period: float = 40.0  # frames
    phase_step: float = 1.9

    def pose(self, joints: int, frame: int) -> SkeletalPose:
        rot = np.zeros((joints, 3))
        for j in range(1, joints):
            ph = self.phase_step * j
            rot[j, 0] = self.amplitude * np.sin(2 * np.pi * frame / self.period + ph)
            rot[j, 1] = 0.6 * self.amplitude * np.sin(2 * np.pi * frame / (self.period * 1.7) + 2 * ph)
        return SkeletalPose(rot, np.zeros(3), frame)

    def to_dict(self):
        return dict(self.__dict__)


@dataclass
class CameraRig:
    count: int = 8
    radius: float = 1.9  # meters
    fov_y: float = 0.62  # radians
    elevations: tuple = (0.1, 0.35)  # alternating around the ring
    look_at: tuple = (0.0, 0.0, 0.35)

    def cameras(self, width: int, height: int):
        out = []
        for k in range(self.count):
            az = 2 * np.pi * k / self.count
            el = self.elevations[k % len(self.elevations)]
            ce, se = np.cos(el), np.sin(el)
            la = np.asarray(self.look_at)
            center = la + self.radius * np.array([ce * np.cos(az), ce * np.sin(az), se])
            out.append(look_at_camera(center, la, self.fov_y, width, height))
        return out

    def to_dict(self):
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in self.__dict__.items()}


@dataclass
class SceneConfig:
    character: CharacterConfig = field(default_factory=CharacterConfig)
    motion: MotionScript = field(default_factory=MotionScript)
    rig: CameraRig = field(default_factory=CameraRig)
    texture: TextureSpec = field(default_factory=TextureSpec)
    shading: ShadingSpec = field(default_factory=ShadingSpec)
    image_size: int = 128
    frames: int = 100
    window: int = 2  # pose history length T
    test_cameras: tuple = (2, 6)
    test_frame_start: int = 90  # novel-pose range held out from training
    background: tuple = (0.2, 0.2, 0.2)
    smooth_iterations: int = 20  # coarse-proxy construction
    smooth_lam: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if any(c >= self.rig.count for c in self.test_cameras):
            raise DatasetError("test camera index outside the rig")

    def to_dict(self) -> dict:
        return {
            "character": dict(self.character.__dict__),
            "motion": self.motion.to_dict(),
            "rig": self.rig.to_dict(),
            "texture": self.texture.to_dict(),
            "shading": self.shading.to_dict(),
            "image_size": self.image_size,
            "frames": self.frames,
            "window": self.window,
            "test_cameras": list(self.test_cameras),
            "test_frame_start": self.test_frame_start,
            "background": list(self.background),
            "smooth_iterations": self.smooth_iterations,
            "smooth_lam": self.smooth_lam,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SceneConfig":
        return cls(
            character=CharacterConfig(**d["character"]),
            motion=MotionScript(**d["motion"]),
            rig=CameraRig(**{k: (tuple(v) if isinstance(v, list) else v) for k, v in d["rig"].items()}),
            texture=TextureSpec.from_dict(d["texture"]),
            shading=ShadingSpec.from_dict(d["shading"]),
            image_size=d["image_size"],
            frames=d["frames"],
            window=d["window"],
            test_cameras=tuple(d["test_cameras"]),
            test_frame_start=d["test_frame_start"],
            background=tuple(d["background"]),
            smooth_iterations=d["smooth_iterations"],
            smooth_lam=d["smooth_lam"],
            seed=d["seed"],
        )

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()

    def build_mesh(self, proxy: bool = False):
        mesh = build_test_character(self.character)
        if proxy:
            mesh = laplacian_smooth(mesh, self.smooth_iterations, self.smooth_lam)
        return mesh

    def poses(self):
        return [self.motion.pose(self.character.joints, f) for f in range(self.frames)]

    def window_for(self, frame: int) -> MotionWindow:
        if frame < self.window:
            raise DatasetError(f"frame {frame} has no complete pose window (T={self.window})")
        return MotionWindow([self.motion.pose(self.character.joints, f)
                             for f in range(frame - self.window, frame + 1)])


def image_path(root: Path, frame: int, cam: int) -> Path:
    return Path(root) / "images" / f"f{frame:05d}_c{cam:02d}.png"


def save_image(path, image: np.ndarray) -> None:
    arr = np.clip(np.asarray(image, dtype=np.float64), 0.0, 1.0)
    Image.fromarray((arr * 255.0 + 0.5).astype(np.uint8)).save(path)


def load_image(path) -> np.ndarray:
    return np.asarray(Image.open(path), dtype=np.float64) / 255.0


def synthesize_dataset(scene: SceneConfig, root) -> "Dataset":
    """Render every (frame, camera) target with the oracle and write the layout:
    manifest.json, images/f*_c*.png, poses.json, cameras.json."""
    root = Path(root)
    (root / "images").mkdir(parents=True, exist_ok=True)
    mesh = scene.build_mesh()
    poses = scene.poses()
    cameras = scene.rig.cameras(scene.image_size, scene.image_size)

    entries = []
    for f, pose in enumerate(poses):
        posed = pose_mesh(mesh, pose)
        for c, cam in enumerate(cameras):
            img = oracle_render(mesh, posed, cam, scene.texture, scene.shading, scene.background)
            rel = f"images/f{f:05d}_c{c:02d}.png"
            save_image(root / rel, img)
            entries.append({"frame": f, "camera": c, "path": rel})

    train_cams = [c for c in range(scene.rig.count) if c not in scene.test_cameras]
    manifest = {
        "scene": scene.to_dict(),
        "scene_digest": scene.digest(),
        "images": entries,
        "split": {
            "train_cameras": train_cams,
            "test_cameras": list(scene.test_cameras),
            "train_frames": [scene.window, scene.test_frame_start - 1],
            "test_frames": [scene.window, scene.frames - 1],
        },
    }
    (root / "manifest.json").write_text(json.dumps(manifest, indent=1))
    (root / "poses.json").write_text(json.dumps(
        [{"frame": p.frame_index, "joint_rotations": p.joint_rotations.tolist(),
          "root_translation": p.root_translation.tolist()} for p in poses], indent=1))
    (root / "cameras.json").write_text(json.dumps([c.to_dict() for c in cameras], indent=1))
    return Dataset(root)


class Dataset:
    """Directory-backed multi-view dataset with train/test bookkeeping."""

    def __init__(self, root):
        self.root = Path(root)
        manifest_path = self.root / "manifest.json"
        if not manifest_path.exists():
            raise DatasetError(f"{manifest_path} not found")
        self.manifest = json.loads(manifest_path.read_text())
        self.scene = SceneConfig.from_dict(self.manifest["scene"])
        self.cameras = [Camera.from_dict(d) for d in json.loads((self.root / "cameras.json").read_text())]
        split = self.manifest["split"]
        self.train_cameras = split["train_cameras"]
        self.test_cameras = split["test_cameras"]
        f0, f1 = split["train_frames"]
        self.train_items = [(f, c) for f in range(f0, f1 + 1) for c in self.train_cameras]
        g0, g1 = split["test_frames"]
        self.test_items = [(f, c) for f in range(g0, g1 + 1) for c in self.test_cameras]
        # evaluation never reads training-split items
        overlap = set(self.train_items) & set(self.test_items)
        if overlap:
            raise DatasetError(f"train/test overlap: {sorted(overlap)[:3]}")

    @property
    def digest(self) -> str:
        return self.manifest["scene_digest"]

    def items(self, split: str):
        if split == "train":
            return list(self.train_items)
        if split == "test":
            return list(self.test_items)
        raise DatasetError(f"unknown split {split!r}")

    def target(self, frame: int, cam: int) -> np.ndarray:
        p = image_path(self.root, frame, cam)
        if not p.exists():
            raise DatasetError(f"missing target image {p}")
        return load_image(p)

    def window_for(self, frame: int) -> MotionWindow:
        return self.scene.window_for(frame)
