"""Command-line entry points: synth-data, train, eval, render, ablate, serve."""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from .ablation import DEFAULT_VARIANTS, run_ablation
from .dataset import CameraRig, Dataset, MotionScript, SceneConfig, save_image, synthesize_dataset
from .mesh import CharacterConfig
from .model import ModelConfig
from .oracle import ShadingSpec, TextureSpec
from .training import GeometryCache, TrainConfig, evaluate, render_item, train


def load_config(path) -> dict:
    with open(path, "rb") as fh:
        return tomllib.load(fh)


def _build(cls, section: dict):
    """Instantiate a dataclass from a config section, keeping defaults for
    unspecified keys and rejecting unknown ones."""
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(section) - names
    if unknown:
        raise ValueError(f"unknown {cls.__name__} keys: {sorted(unknown)}")
    kw = {k: (tuple(v) if isinstance(v, list) else v) for k, v in section.items()}
    return cls(**kw)


def scene_from_config(doc: dict) -> SceneConfig:
    s = dict(doc.get("scene", {}))
    parts = {
        "character": _build(CharacterConfig, s.pop("character", {})),
        "motion": _build(MotionScript, s.pop("motion", {})),
        "rig": _build(CameraRig, s.pop("rig", {})),
        "texture": _build(TextureSpec, s.pop("texture", {})),
        "shading": _build(ShadingSpec, s.pop("shading", {})),
    }
    kw = {k: (tuple(v) if isinstance(v, list) else v) for k, v in s.items()}
    return SceneConfig(**parts, **kw)


def model_from_config(doc: dict) -> ModelConfig:
    return _build(ModelConfig, doc.get("model", {}))


def train_from_config(doc: dict) -> TrainConfig:
    return _build(TrainConfig, doc.get("train", {}))


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lightslab",
                                description="Deformable two-surface light field renderer")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("synth-data", help="render a synthetic multi-view dataset")
    sp.add_argument("--config", required=True, help="TOML config with a [scene] section")
    sp.add_argument("--out", required=True, help="output dataset directory")

    sp = sub.add_parser("train", help="train a light-field model")
    sp.add_argument("--config", required=True, help="TOML config ([model], [train])")
    sp.add_argument("--data", required=True, help="dataset directory")
    sp.add_argument("--out", required=True, help="run directory for checkpoints/logs")
    sp.add_argument("--resume", default=None, help="checkpoint to resume from")
    sp.add_argument("--proxy-mesh", action="store_true",
                    help="train against the Laplacian-smoothed proxy mesh")

    sp = sub.add_parser("eval", help="PSNR evaluation of a checkpoint")
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--data", required=True)
    sp.add_argument("--split", default="test", choices=["train", "test"])
    sp.add_argument("--every", type=int, default=10, help="evaluate every Nth frame")
    sp.add_argument("--out", default=None, help="optional JSON report path")

    sp = sub.add_parser("render", help="render one frame from a checkpoint")
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--data", required=True)
    sp.add_argument("--frame", type=int, required=True)
    sp.add_argument("--camera-index", type=int, default=None)
    sp.add_argument("--azimuth", type=float, default=None)
    sp.add_argument("--elevation", type=float, default=0.2)
    sp.add_argument("--radius", type=float, default=1.9)
    sp.add_argument("--out", required=True, help="output PNG path")

    sp = sub.add_parser("ablate", help="train and evaluate representation variants")
    sp.add_argument("--config", required=True)
    sp.add_argument("--data", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--variants", default=",".join(DEFAULT_VARIANTS),
                    help="comma-separated variant names")

    sp = sub.add_parser("serve", help="interactive websocket render service")
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--data", default=None, help="dataset directory (mesh+motion source)")
    sp.add_argument("--mesh", default=None, help="OBJ path (with .skel.json sidecar)")
    sp.add_argument("--motion", default=None, help="poses.json path")
    sp.add_argument("--port", type=int, default=8787)
    sp.add_argument("--host", default="127.0.0.1")
    sp.add_argument("--resolution", type=int, default=128)
    return p


def cmd_synth_data(args) -> int:
    scene = scene_from_config(load_config(args.config))
    ds = synthesize_dataset(scene, args.out)
    print(f"wrote {len(ds.manifest['images'])} images to {args.out}")
    return 0


def cmd_train(args) -> int:
    doc = load_config(args.config)
    ds = Dataset(args.data)
    net = train(ds, model_from_config(doc), train_from_config(doc), args.out,
                resume_from=args.resume, proxy_mesh=args.proxy_mesh,
                progress=lambda s, l: print(f"iter {s} loss {l:.5f}", flush=True))
    print(f"final checkpoint at {Path(args.out) / 'ckpt_final.dlfs'} (step {net.step})")
    return 0


def cmd_eval(args) -> int:
    ds = Dataset(args.data)
    res = evaluate(args.checkpoint, ds, args.split, every=args.every)
    line = json.dumps(res)
    print(line)
    if args.out:
        Path(args.out).write_text(line)
    return 0


def cmd_render(args) -> int:
    from .checkpoint import load_checkpoint
    from .model import neural_forward, prepare_frame_inputs
    from .raycast import orbit_camera

    ds = Dataset(args.data)
    net = load_checkpoint(args.checkpoint)
    proxy = net.config.scene_tag.endswith(":proxy")
    mesh = ds.scene.build_mesh(proxy=proxy)
    window = ds.window_for(args.frame)
    if args.camera_index is not None:
        camera = ds.cameras[args.camera_index]
    elif args.azimuth is not None:
        camera = orbit_camera(args.azimuth, args.elevation, args.radius,
                              ds.scene.rig.look_at, ds.scene.rig.fov_y,
                              ds.scene.image_size, ds.scene.image_size)
    else:
        raise ValueError("pass --camera-index or --azimuth")
    inputs = prepare_frame_inputs(mesh, window, camera, net.config)
    image, _, stats = neural_forward(net, inputs)
    save_image(args.out, image)
    print(f"wrote {args.out} ({stats['foreground_pixels']} foreground pixels)")
    return 0


def cmd_ablate(args) -> int:
    doc = load_config(args.config)
    ds = Dataset(args.data)
    rows = run_ablation(ds, model_from_config(doc), train_from_config(doc), args.out,
                        variants=tuple(v.strip() for v in args.variants.split(",") if v.strip()),
                        progress=lambda m: print(m, flush=True))
    for r in rows:
        print(f"{r['variant']},{r['psnr_mean']:.4f}")
    return 0


def cmd_serve(args) -> int:
    from . import meshio
    from .service import build_state, load_motion, serve

    if args.data:
        ds = Dataset(args.data)
        net_cfg_proxy = False
        mesh = ds.scene.build_mesh(proxy=net_cfg_proxy)
        poses = [ds.scene.motion.pose(ds.scene.character.joints, f) for f in range(ds.scene.frames)]
        look_at = ds.scene.rig.look_at
    elif args.mesh and args.motion:
        mesh = meshio.load_mesh(args.mesh)
        poses = load_motion(args.motion)
        look_at = (0.0, 0.0, 0.35)
    else:
        raise ValueError("pass --data or both --mesh and --motion")
    state = build_state(args.checkpoint, mesh, poses, resolution=args.resolution, look_at=look_at)
    serve(state, host=args.host, port=args.port)
    return 0


_COMMANDS = {
    "synth-data": cmd_synth_data,
    "train": cmd_train,
    "eval": cmd_eval,
    "render": cmd_render,
    "ablate": cmd_ablate,
    "serve": cmd_serve,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except Exception as e:  # one-line machine-parsable error, nonzero exit
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
