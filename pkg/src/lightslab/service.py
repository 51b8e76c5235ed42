"""Interactive render service: websocket frame streaming over a single render worker."""

from __future__ import annotations

import asyncio
import hashlib
import io
import json
import time
from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from PIL import Image

from . import __version__
from .checkpoint import load_checkpoint
from .mesh import MotionWindow, SkeletalPose, SkinnedMesh, build_two_surface_frame
from .model import NetworkParameters, neural_forward, prepare_frame_inputs
from .raycast import build_frame_bvhs, orbit_camera, point_outside_surface, Camera


class ServiceError(Exception):
    pass


@dataclass
class RenderState:
    """Immutable-after-load scene state shared by all connections."""

    net: NetworkParameters
    mesh: SkinnedMesh
    poses: list  # SkeletalPose per frame
    checkpoint_digest: str
    resolution: int = 128
    fov_y: float = 0.62
    look_at: tuple = (0.0, 0.0, 0.35)
    min_radius: float = 0.5
    tnm_cache: OrderedDict = field(default_factory=OrderedDict)
    tnm_cache_limit: int = 16

    @property
    def window(self) -> int:
        return self.net.config.window

    def pose_window(self, frame: int) -> MotionWindow:
        T = self.window
        if frame < T or frame >= len(self.poses):
            raise ServiceError(f"frame {frame} outside valid range [{T}, {len(self.poses) - 1}]")
        return MotionWindow(self.poses[frame - T:frame + 1])


def load_motion(path) -> list:
    doc = json.loads(Path(path).read_text())
    return [SkeletalPose(np.array(p["joint_rotations"]), np.array(p["root_translation"]),
                         p["frame"]) for p in doc]


def build_state(checkpoint_path, mesh: SkinnedMesh, poses: list, resolution: int = 128,
                look_at=(0.0, 0.0, 0.35)) -> RenderState:
    net = load_checkpoint(checkpoint_path)
    digest = hashlib.sha256(Path(checkpoint_path).read_bytes()).hexdigest()
    return RenderState(net, mesh, poses, digest, resolution=resolution, look_at=look_at)


def parse_request(state: RenderState, msg: dict):
    """Validate a RenderRequest message; returns (request_id, frame, window, camera)."""
    if "request_id" not in msg:
        raise ServiceError("missing request_id")
    rid = int(msg["request_id"])
    pose_sel = msg.get("pose", {})
    if "frame" in pose_sel:
        frame = int(pose_sel["frame"])
        window = state.pose_window(frame)
    elif "joint_rotations" in pose_sel:
        frame = -1
        pose = SkeletalPose(np.array(pose_sel["joint_rotations"], dtype=np.float64),
                            np.array(pose_sel.get("root_translation", [0, 0, 0]), dtype=np.float64),
                            state.window)
        window = MotionWindow([SkeletalPose(pose.joint_rotations, pose.root_translation, k)
                               for k in range(state.window + 1)])
    else:
        raise ServiceError("pose selector must carry 'frame' or 'joint_rotations'")

    cam_spec = msg.get("camera", {})
    res = int(msg.get("resolution", state.resolution))
    if not 16 <= res <= 1024:
        raise ServiceError(f"resolution {res} out of range [16, 1024]")
    if "orbit" in cam_spec:
        orbit = cam_spec["orbit"]
        radius = float(orbit["radius"])
        if radius < state.min_radius:
            raise ServiceError(f"orbit radius {radius} below minimum {state.min_radius}")
        camera = orbit_camera(float(orbit["azimuth"]), float(orbit["elevation"]), radius,
                              orbit.get("look_at", state.look_at), state.fov_y, res, res)
    elif "full" in cam_spec:
        camera = Camera.from_dict(cam_spec["full"])
    else:
        raise ServiceError("camera must carry 'orbit' or 'full'")
    return rid, frame, window, camera


def render_frame(state: RenderState, frame: int, window: MotionWindow, camera: Camera):
    """One full render; returns (png bytes, timings dict, foreground count)."""
    t_total = time.perf_counter()
    cfg = state.net.config

    cache_key = frame if frame >= 0 else None
    t0 = time.perf_counter()
    geo = build_two_surface_frame(state.mesh, window.current, cfg.offset)
    bvhs = build_frame_bvhs(geo)
    if not point_outside_surface(camera.center(), bvhs[1]):
        raise ServiceError("camera center lies inside the outer surface")

    inputs = None
    if cache_key is not None and cache_key in state.tnm_cache:
        tnm_inner, tnm_outer = state.tnm_cache[cache_key]
        from .raycast import render_uv_maps

        uv_maps = render_uv_maps(camera, geo, *bvhs, check_camera=False)
        view_dirs = camera.ray_directions() if cfg.variant == "single_surface_viewdir" else None
        from .model import FrameInputs

        bake_ms = 0.0
        raycast_ms = (time.perf_counter() - t0) * 1e3
        inputs = FrameInputs(uv_maps, tnm_inner, tnm_outer, view_dirs, bake_ms, raycast_ms)
    else:
        inputs = prepare_frame_inputs(state.mesh, window, camera, cfg, bvhs=bvhs)
        if cache_key is not None:
            state.tnm_cache[cache_key] = (inputs.tnm_inner, inputs.tnm_outer)
            while len(state.tnm_cache) > state.tnm_cache_limit:
                state.tnm_cache.popitem(last=False)

    image, _, stats = neural_forward(state.net, inputs)
    total_ms = (time.perf_counter() - t_total) * 1e3

    buf = io.BytesIO()
    arr = (np.clip(image.astype(np.float64), 0, 1) * 255.0 + 0.5).astype(np.uint8)
    Image.fromarray(arr).save(buf, format="PNG")
    timings = {
        "bake_ms": round(inputs.bake_ms, 3),
        "raycast_ms": round(inputs.raycast_ms, 3),
        "extractor_ms": round(stats["extractor_ms"], 3),
        "mlp_ms": round(stats["mlp_ms"], 3),
        "total_ms": round(total_ms, 3),
    }
    return buf.getvalue(), timings, stats["foreground_pixels"]


class LatestWinsQueue:
    """Depth-1 pending slot per connection; a new request replaces an unstarted one."""

    def __init__(self):
        self.slots = OrderedDict()  # conn id -> (payload...)

    def put(self, conn_id, item):
        self.slots[conn_id] = item  # replaces any unstarted request
        self.slots.move_to_end(conn_id)

    def drop_connection(self, conn_id):
        self.slots.pop(conn_id, None)

    async def get(self, gate=None):
        """Poll until a request is pending and the gate (if any) is open; a held
        gate keeps queued requests replaceable by newer ones."""
        while not self.slots or (gate is not None and not gate.is_set()):
            await asyncio.sleep(0.004)
        conn_id, item = next(iter(self.slots.items()))
        del self.slots[conn_id]
        return conn_id, item


def create_app(state: RenderState) -> FastAPI:
    import threading
    from contextlib import asynccontextmanager

    @asynccontextmanager
    async def lifespan(app_):
        task = asyncio.create_task(worker())
        yield
        task.cancel()

    app = FastAPI(lifespan=lifespan)
    app.state.render_state = state
    queue = LatestWinsQueue()
    app.state.queue = queue
    app.state.sockets = {}
    app.state.worker_gate = threading.Event()  # tests may clear this to hold the worker
    app.state.worker_gate.set()

    @app.get("/healthz")
    def healthz():
        return {"version": __version__, "checkpoint_digest": state.checkpoint_digest,
                "frames": len(state.poses), "window": state.window,
                "min_radius": state.min_radius}

    async def worker():
        loop = asyncio.get_running_loop()
        while True:
            conn_id, (rid, frame, window, camera) = await queue.get(app.state.worker_gate)
            ws = app.state.sockets.get(conn_id)
            if ws is None:
                continue
            try:
                png, timings, fg = await loop.run_in_executor(
                    None, render_frame, state, frame, window, camera)
                header = {"request_id": rid, "frame": frame, "timings": timings,
                          "foreground_pixels": fg, "payload_bytes": len(png)}
                await ws.send_text(json.dumps(header))
                await ws.send_bytes(png)
            except ServiceError as e:
                await ws.send_text(json.dumps({"request_id": rid, "error": str(e)}))
            except (WebSocketDisconnect, RuntimeError):
                pass

    @app.websocket("/render")
    async def render_ws(ws: WebSocket):
        await ws.accept()
        conn_id = id(ws)
        app.state.sockets[conn_id] = ws
        try:
            while True:
                raw = await ws.receive_text()
                try:
                    msg = json.loads(raw)
                    if not isinstance(msg, dict):
                        raise ServiceError("request must be a JSON object")
                except (json.JSONDecodeError, ServiceError) as e:
                    await ws.send_text(json.dumps({"request_id": -1, "error": f"malformed request: {e}"}))
                    continue
                try:
                    item = parse_request(state, msg)
                except (ServiceError, KeyError, TypeError, ValueError) as e:
                    rid = msg.get("request_id", -1)
                    try:
                        rid = int(rid)
                    except (TypeError, ValueError):
                        rid = -1
                    await ws.send_text(json.dumps({"request_id": rid, "error": str(e)}))
                    continue
                queue.put(conn_id, item)
        except WebSocketDisconnect:
            pass
        finally:
            queue.drop_connection(conn_id)
            app.state.sockets.pop(conn_id, None)

    static_dir = Path(__file__).resolve().parents[2] / "frontend" / "dist"
    if static_dir.is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="viewer")
    return app


def serve(state: RenderState, host: str = "127.0.0.1", port: int = 0) -> None:
    """Bind (printing the ephemeral port before accepting), then run uvicorn."""
    import socket

    import uvicorn

    app = create_app(state)
    sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
    sock.bind((host, port))
    bound = sock.getsockname()[1]
    print(f"lightslab serving on {host}:{bound}", flush=True)
    config = uvicorn.Config(app, log_level="warning")
    server = uvicorn.Server(config)
    server.run(sockets=[sock])
