"""Training loop: cached geometry, counter-based sampling, Adam, checkpoints."""

from __future__ import annotations

import json
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .baking import bake_normal_map
from .checkpoint import load_checkpoint, save_checkpoint
from .dataset import Dataset
from .mesh import build_two_surface_frame
from .model import (
    FrameInputs,
    ModelConfig,
    NetworkParameters,
    adam_step,
    foreground_mask,
    init_parameters,
    l1_loss,
    neural_backward,
    neural_forward,
)
from .raycast import build_frame_bvhs, load_uv_maps, render_uv_maps, save_uv_maps


class TrainingError(Exception):
    pass


@dataclass
class TrainConfig:
    iterations: int = 2000
    lr: float = 2e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    log_every: int = 25
    checkpoint_every: int = 1000
    seed: int = 0


def sample_index(seed: int, iteration: int, n: int) -> int:
    """Stateless uniform draw: counter-based so resumed runs sample identically."""
    bg = np.random.Philox(key=seed, counter=[0, 0, 0, iteration])
    return int(np.random.Generator(bg).integers(0, n))


class GeometryCache:
    """Disk cache of per-frame normal maps and per-(frame,camera) UV maps.

    Keyed by the dataset digest plus the geometry-relevant model settings, so
    model variants of the same scene share it.
    """

    def __init__(self, dataset: Dataset, config: ModelConfig, cache_dir, proxy_mesh: bool):
        self.dataset = dataset
        self.config = config
        self.proxy = proxy_mesh
        key = f"{dataset.digest[:12]}_{'proxy' if proxy_mesh else 'true'}_R{config.bake_resolution}_d{config.offset}_T{config.window}"
        self.dir = Path(cache_dir) / key
        (self.dir / "nm").mkdir(parents=True, exist_ok=True)
        (self.dir / "uv").mkdir(parents=True, exist_ok=True)
        self.mesh = dataset.scene.build_mesh(proxy=proxy_mesh)

    def _normal_map_path(self, frame: int, surface: str) -> Path:
        return self.dir / "nm" / f"f{frame:05d}_{surface}.npy"

    def _uv_path(self, frame: int, cam: int) -> Path:
        return self.dir / "uv" / f"f{frame:05d}_c{cam:02d}.suvm"

    def build(self, frames, cameras) -> None:
        """Populate missing cache entries; idempotent."""
        scene = self.dataset.scene
        need_frames = sorted({f for f in frames})
        pose_frames = sorted({g for f in need_frames for g in range(f - scene.window, f + 1)})
        surfaces = ("inner", "outer") if self.config.variant == "two_surface" else ("inner",)
        for g in pose_frames:
            frame_geo = None
            for surface in surfaces:
                p = self._normal_map_path(g, surface)
                if p.exists():
                    continue
                if frame_geo is None:
                    frame_geo = build_two_surface_frame(self.mesh, scene.motion.pose(
                        scene.character.joints, g), self.config.offset)
                raster = bake_normal_map(frame_geo, surface, self.config.bake_resolution,
                                         self.config.dilate_normal_maps)
                np.save(p, raster.values.astype(np.float32))
        for f in need_frames:
            missing = [c for c in cameras if not self._uv_path(f, c).exists()]
            if not missing:
                continue
            frame_geo = build_two_surface_frame(self.mesh, scene.motion.pose(
                scene.character.joints, f), self.config.offset)
            bvhs = build_frame_bvhs(frame_geo)
            for c in missing:
                maps = render_uv_maps(self.dataset.cameras[c], frame_geo, *bvhs)
                save_uv_maps(maps, self._uv_path(f, c))

    def temporal_normal_map(self, frame: int, surface: str) -> np.ndarray:
        slices = [np.load(self._normal_map_path(g, surface))
                  for g in range(frame - self.dataset.scene.window, frame + 1)]
        return np.concatenate(slices, axis=2)

    def frame_inputs(self, frame: int, cam: int) -> FrameInputs:
        uv_maps = load_uv_maps(self._uv_path(frame, cam))
        tnm_inner = self.temporal_normal_map(frame, "inner")
        tnm_outer = None
        if self.config.variant == "two_surface":
            tnm_outer = self.temporal_normal_map(frame, "outer")
        view_dirs = None
        if self.config.variant == "single_surface_viewdir":
            view_dirs = self.dataset.cameras[cam].ray_directions()
        return FrameInputs(uv_maps, tnm_inner, tnm_outer, view_dirs)


def train(dataset: Dataset, model_config: ModelConfig, train_config: TrainConfig,
          out_dir, cache_dir=None, proxy_mesh: bool = False,
          resume_from=None, progress=None) -> NetworkParameters:
    """Iterate {sample, forward, L1, backward, Adam}; logs, checkpoints, resumable.

    The checkpoint config digest binds the model settings and the dataset/mesh
    identity through `scene_tag`.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if model_config.window != dataset.scene.window:
        raise TrainingError(
            f"model window T={model_config.window} != dataset window T={dataset.scene.window}")
    cache = GeometryCache(dataset, model_config, cache_dir or out_dir / "cache", proxy_mesh)

    scene_tag = f"{dataset.digest[:12]}:{'proxy' if proxy_mesh else 'true'}"
    model_config.scene_tag = scene_tag
    if resume_from is not None:
        net = load_checkpoint(resume_from, expect_digest=model_config.digest())
    else:
        net = init_parameters(model_config)

    items = dataset.items("train")
    if not items:
        raise TrainingError("empty training split")
    cache.build(sorted({f for f, _ in items}), sorted({c for _, c in items}))

    log_path = out_dir / "loss_log.csv"
    mode = "a" if resume_from is not None and log_path.exists() else "w"
    log = open(log_path, mode)
    if mode == "w":
        log.write("iteration,loss,wall_ms\n")

    t_start = time.perf_counter()
    try:
        while net.step < train_config.iterations:
            it = net.step  # sampling is keyed by the pre-update step counter
            f, c = items[sample_index(train_config.seed, it, len(items))]
            inputs = cache.frame_inputs(f, c)
            target = dataset.target(f, c)
            image, fwd_cache, _ = neural_forward(net, inputs)
            loss, grad_img = l1_loss(image, target)
            if not np.isfinite(loss):
                raise TrainingError(f"non-finite loss at iteration {it} (frame={f}, camera={c})")
            grads = neural_backward(net, fwd_cache, grad_img)
            adam_step(net, grads, train_config.lr, train_config.beta1,
                      train_config.beta2, train_config.eps)
            if net.step % train_config.log_every == 0 or net.step == train_config.iterations:
                wall = (time.perf_counter() - t_start) * 1e3
                log.write(f"{net.step},{loss:.8f},{wall:.1f}\n")
                log.flush()
            if progress is not None and net.step % 500 == 0:
                progress(net.step, loss)
            if train_config.checkpoint_every and net.step % train_config.checkpoint_every == 0:
                save_checkpoint(net, out_dir / f"ckpt_{net.step:07d}.dlfs")
    finally:
        log.close()
    save_checkpoint(net, out_dir / "ckpt_final.dlfs")
    return net


def render_item(net: NetworkParameters, cache: GeometryCache, dataset: Dataset,
                frame: int, cam: int):
    """Forward render one dataset item through the cached geometry."""
    inputs = cache.frame_inputs(frame, cam)
    return neural_forward(net, inputs)


def evaluate(net_or_checkpoint, dataset: Dataset, split: str = "test",
             cache_dir=None, every: int = 10):
    """PSNR on every `every`-th frame of the split: 10*log10(1/MSE) per image.

    Returns {"psnr_mean", "per_camera", "count"}; identical predictions report inf.
    """
    if isinstance(net_or_checkpoint, (str, Path)):
        net = load_checkpoint(net_or_checkpoint)
    else:
        net = net_or_checkpoint
    tag = net.config.scene_tag
    expect_prefix = dataset.digest[:12]
    if not tag.startswith(expect_prefix):
        raise TrainingError(
            f"checkpoint was trained on scene {tag!r}, dataset digest is {expect_prefix!r}")
    proxy = tag.endswith(":proxy")
    cache = GeometryCache(dataset, net.config, cache_dir or dataset.root / "cache", proxy)
    items = [(f, c) for f, c in dataset.items(split) if f % every == 0]
    if not items:
        raise TrainingError(f"no items in split {split!r} at every={every}")
    cache.build(sorted({f for f, _ in items}), sorted({c for _, c in items}))

    per_camera = {}
    psnrs = []
    for f, c in items:
        image, _, _ = render_item(net, cache, dataset, f, c)
        target = dataset.target(f, c)
        mse = float(np.mean((image.astype(np.float64) - target) ** 2))
        psnr = float("inf") if mse == 0.0 else float(10.0 * np.log10(1.0 / mse))
        psnrs.append(psnr)
        per_camera.setdefault(c, []).append(psnr)
    return {
        "psnr_mean": float(np.mean(psnrs)),
        "per_camera": {c: float(np.mean(v)) for c, v in sorted(per_camera.items())},
        "count": len(items),
    }
