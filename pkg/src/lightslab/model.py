"""Learnable pipeline: feature extractors over temporal normal maps and the
light-field MLP, composed per frame with explicit reverse-mode gradients."""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, field

import numpy as np

from . import layers
from .baking import build_temporal_normal_map
from .encoding import bilinear_sample, bilinear_sample_adjoint, encode_sinusoidal
from .mesh import MotionWindow, SkinnedMesh, build_two_surface_frame
from .raycast import KIND_BACKGROUND, KIND_BOTH, Camera, ScreenUVMaps, build_frame_bvhs, render_uv_maps

VARIANTS = ("two_surface", "single_surface", "single_surface_viewdir")

MLP_LAYERS = 8
MLP_WIDTH = 256
FEATURE_JOIN_LAYER = 4  # features concatenate onto this layer's activation


@dataclass
class ModelConfig:
    variant: str = "two_surface"
    window: int = 2  # T: motion window covers T+1 poses
    bake_resolution: int = 256
    feature_channels: int = 8
    encoder_channels: tuple = (16, 32, 32, 32)
    posenc_bands: int = 10
    viewdir_bands: int = 4
    offset: float = 0.03  # meters
    background: tuple = (0.2, 0.2, 0.2)
    dilate_normal_maps: bool = False
    dtype: str = "float32"
    seed: int = 0
    scene_tag: str = ""  # binds a checkpoint to the dataset/mesh it was trained on

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")

    @property
    def np_dtype(self):
        return np.float32 if self.dtype == "float32" else np.float64

    @property
    def input_channels(self) -> int:
        return 3 * (self.window + 1)

    @property
    def encoding_dim(self) -> int:
        base = 4 * self.posenc_bands  # one uv pair
        if self.variant == "two_surface":
            return 2 * base
        if self.variant == "single_surface_viewdir":
            return base + 6 * self.viewdir_bands
        return base

    @property
    def feature_dim(self) -> int:
        return (2 if self.variant == "two_surface" else 1) * self.feature_channels

    @property
    def surfaces(self) -> tuple:
        return ("inner", "outer") if self.variant == "two_surface" else ("inner",)

    def to_dict(self) -> dict:
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in self.__dict__.items()}

    def digest(self) -> bytes:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).digest()

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        d = dict(d)
        for k in ("encoder_channels", "background"):
            if k in d:
                d[k] = tuple(d[k])
        return cls(**d)


@dataclass
class NetworkParameters:
    """All learnable tensors plus Adam state, keyed by name."""

    config: ModelConfig
    params: dict
    adam_m: dict = field(default_factory=dict)
    adam_v: dict = field(default_factory=dict)
    step: int = 0

    def init_adam(self):
        self.adam_m = {k: np.zeros_like(v) for k, v in self.params.items()}
        self.adam_v = {k: np.zeros_like(v) for k, v in self.params.items()}
        self.step = 0

    def zero_grads(self) -> dict:
        return {k: np.zeros_like(v) for k, v in self.params.items()}


def _uniform_fanin(rng, shape, fan_in, dtype):
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


def init_parameters(config: ModelConfig) -> NetworkParameters:
    """Uniform fan-in initialization for every layer; deterministic from config.seed."""
    rng = np.random.default_rng(config.seed)
    dt = config.np_dtype
    p = {}
    k = 3
    for surface in config.surfaces:
        cin = config.input_channels
        enc = config.encoder_channels
        for i, cout in enumerate(enc):
            p[f"ext_{surface}.down{i}.w"] = _uniform_fanin(rng, (k, k, cin, cout), k * k * cin, dt)
            p[f"ext_{surface}.down{i}.b"] = _uniform_fanin(rng, (cout,), k * k * cin, dt)
            cin = cout
        # decoder mirrors the encoder; skip concatenations double the input channels
        skips = list(enc[:-1][::-1]) + [config.input_channels]
        dec_out = list(enc[:-1][::-1]) + [config.feature_channels]
        for i, (skip, cout) in enumerate(zip(skips, dec_out)):
            cin_total = cin + skip
            p[f"ext_{surface}.up{i}.w"] = _uniform_fanin(rng, (k, k, cin_total, cout), k * k * cin_total, dt)
            p[f"ext_{surface}.up{i}.b"] = _uniform_fanin(rng, (cout,), k * k * cin_total, dt)
            cin = cout
    dims_in = [config.encoding_dim] + [MLP_WIDTH] * (MLP_LAYERS - 1)
    dims_in[FEATURE_JOIN_LAYER] += config.feature_dim
    dims_out = [MLP_WIDTH] * (MLP_LAYERS - 1) + [3]
    for i, (din, dout) in enumerate(zip(dims_in, dims_out), start=1):
        p[f"mlp.l{i}.w"] = _uniform_fanin(rng, (din, dout), din, dt)
        p[f"mlp.l{i}.b"] = _uniform_fanin(rng, (dout,), din, dt)
    net = NetworkParameters(config, p)
    net.init_adam()
    return net


# ---------------------------------------------------------------------------
# feature extractor (encoder-decoder with skip connections)


def extractor_forward(net: NetworkParameters, surface: str, x: np.ndarray):
    """Temporal normal map (R,R,3(T+1)) -> feature map (R,R,C_f) with cache."""
    cfg = net.config
    if x.shape[2] != cfg.input_channels:
        raise ValueError(f"expected {cfg.input_channels} input channels, got {x.shape[2]}")
    if x.shape[0] % (2 ** len(cfg.encoder_channels)) != 0:
        raise ValueError(f"resolution {x.shape[0]} not divisible by the encoder stride")
    x = x.astype(cfg.np_dtype, copy=False)
    p = net.params
    caches = []
    skips = [x]
    h = x
    for i in range(len(cfg.encoder_channels)):
        h, c_conv = layers.conv2d_forward(h, p[f"ext_{surface}.down{i}.w"],
                                          p[f"ext_{surface}.down{i}.b"], stride=2)
        h, c_act = layers.leaky_relu_forward(h)
        caches.append(("down", i, c_conv, c_act))
        skips.append(h)
    n_up = len(cfg.encoder_channels)
    for i in range(n_up):
        h, up_shape = layers.upsample2x_forward(h)
        skip = skips[n_up - 1 - i]
        h = np.concatenate([h, skip], axis=2)
        split = h.shape[2] - skip.shape[2]
        h, c_conv = layers.conv2d_forward(h, p[f"ext_{surface}.up{i}.w"],
                                          p[f"ext_{surface}.up{i}.b"], stride=1)
        last = i == n_up - 1
        if last:
            caches.append(("up", i, up_shape, split, c_conv, None))
        else:
            h, c_act = layers.leaky_relu_forward(h)
            caches.append(("up", i, up_shape, split, c_conv, c_act))
    return h, caches


def extractor_backward(net: NetworkParameters, surface: str, caches, grad_out: np.ndarray):
    """Gradients for every extractor tensor; input gradients are discarded
    (normal maps are not learnable)."""
    grads = {}
    g = grad_out
    down_caches = [c for c in caches if c[0] == "down"]
    up_caches = [c for c in caches if c[0] == "up"]
    skip_grads = [None] * (len(down_caches) + 1)
    for entry in reversed(up_caches):
        _, i, up_shape, split, c_conv, c_act = entry
        if c_act is not None:
            g = layers.leaky_relu_backward(g, c_act)
        g, gw, gb = layers.conv2d_backward(g, c_conv)
        grads[f"ext_{surface}.up{i}.w"] = gw
        grads[f"ext_{surface}.up{i}.b"] = gb
        g_up, g_skip = g[..., :split], g[..., split:]
        level = len(down_caches) - 1 - i
        skip_grads[level] = g_skip
        g = layers.upsample2x_backward(g_up, up_shape)
    for entry in reversed(down_caches):
        _, i, c_conv, c_act = entry
        if skip_grads[i + 1] is not None:
            g = g + skip_grads[i + 1]
        g = layers.leaky_relu_backward(g, c_act)
        g, gw, gb = layers.conv2d_backward(g, c_conv)
        grads[f"ext_{surface}.down{i}.w"] = gw
        grads[f"ext_{surface}.down{i}.b"] = gb
    return grads


# ---------------------------------------------------------------------------
# light-field MLP


def mlp_forward(net: NetworkParameters, encoded: np.ndarray, features: np.ndarray):
    """Rows of ray encodings plus sampled features -> rgb in [0,1] with cache."""
    cfg = net.config
    p = net.params
    h = encoded.astype(cfg.np_dtype, copy=False)
    features = features.astype(cfg.np_dtype, copy=False)
    caches = []
    for i in range(1, MLP_LAYERS + 1):
        if i == FEATURE_JOIN_LAYER + 1:
            h = np.concatenate([h, features], axis=1)
        h, c_lin = layers.linear_forward(h, p[f"mlp.l{i}.w"], p[f"mlp.l{i}.b"])
        if i < MLP_LAYERS:
            h, c_act = layers.relu_forward(h)
        else:
            h, c_act = layers.sigmoid_forward(h)
        caches.append((c_lin, c_act))
    return h, caches


def mlp_backward(net: NetworkParameters, caches, grad_rgb: np.ndarray):
    """Returns (param grads, grad encoded, grad features)."""
    p = net.params
    grads = {}
    g = grad_rgb
    grad_features = None
    for i in range(MLP_LAYERS, 0, -1):
        c_lin, c_act = caches[i - 1]
        if i < MLP_LAYERS:
            g = layers.relu_backward(g, c_act)
        else:
            g = layers.sigmoid_backward(g, c_act)
        g, gw, gb = layers.linear_backward(g, c_lin)
        grads[f"mlp.l{i}.w"] = gw
        grads[f"mlp.l{i}.b"] = gb
        if i == FEATURE_JOIN_LAYER + 1:
            feat_dim = net.config.feature_dim
            grad_features = g[:, -feat_dim:]
            g = g[:, :-feat_dim]
    return grads, g, grad_features


# ---------------------------------------------------------------------------
# per-frame composition


@dataclass
class FrameInputs:
    """Geometry bundle consumed by the neural stage: per-pixel UV maps, the two
    temporal normal maps, and per-pixel view directions (for the viewdir variant)."""

    uv_maps: ScreenUVMaps
    tnm_inner: np.ndarray  # (R,R,3(T+1))
    tnm_outer: np.ndarray = None
    view_dirs: np.ndarray = None  # (H,W,3) unit vectors
    bake_ms: float = 0.0
    raycast_ms: float = 0.0


def prepare_frame_inputs(mesh: SkinnedMesh, window: MotionWindow, camera: Camera,
                         config: ModelConfig, bvhs=None, uv_maps: ScreenUVMaps = None) -> FrameInputs:
    """Bake temporal normal maps and render the screen-space UV maps for one frame."""
    t0 = time.perf_counter()
    tnm_inner = build_temporal_normal_map(mesh, window, "inner", config.offset,
                                          config.bake_resolution, config.dilate_normal_maps)
    tnm_outer = None
    if config.variant == "two_surface":
        tnm_outer = build_temporal_normal_map(mesh, window, "outer", config.offset,
                                              config.bake_resolution, config.dilate_normal_maps)
    bake_ms = (time.perf_counter() - t0) * 1e3

    t0 = time.perf_counter()
    if uv_maps is None:
        frame = build_two_surface_frame(mesh, window.current, config.offset)
        if bvhs is None:
            bvhs = build_frame_bvhs(frame)
        uv_maps = render_uv_maps(camera, frame, *bvhs)
    raycast_ms = (time.perf_counter() - t0) * 1e3

    view_dirs = None
    if config.variant == "single_surface_viewdir":
        view_dirs = camera.ray_directions()
    return FrameInputs(uv_maps, tnm_inner.values, None if tnm_outer is None else tnm_outer.values,
                       view_dirs, bake_ms, raycast_ms)


def foreground_mask(config: ModelConfig, uv_maps: ScreenUVMaps) -> np.ndarray:
    """Pixels the MLP evaluates: all outer hits for two-surface, inner hits otherwise."""
    if config.variant == "two_surface":
        return uv_maps.kind != KIND_BACKGROUND
    return uv_maps.kind == KIND_BOTH


def neural_forward(net: NetworkParameters, inputs: FrameInputs):
    """Feature extraction, sampling, and one MLP evaluation per foreground pixel.

    Returns (image, cache, stats); stats carries timings and the MLP row count.
    """
    cfg = net.config
    dt = cfg.np_dtype
    t0 = time.perf_counter()
    feat_maps = {}
    ext_caches = {}
    tnm = {"inner": inputs.tnm_inner, "outer": inputs.tnm_outer}
    for surface in cfg.surfaces:
        feat_maps[surface], ext_caches[surface] = extractor_forward(net, surface, tnm[surface])
    extractor_ms = (time.perf_counter() - t0) * 1e3

    t0 = time.perf_counter()
    maps = inputs.uv_maps
    fg = foreground_mask(cfg, maps)
    w_inner = maps.w_inner[fg]
    w_out = maps.w_out[fg]
    if cfg.variant == "two_surface":
        encoded = np.concatenate([
            encode_sinusoidal(w_out, cfg.posenc_bands),
            encode_sinusoidal(w_inner, cfg.posenc_bands),
        ], axis=1)
        features = np.concatenate([
            bilinear_sample(feat_maps["outer"], w_out),
            bilinear_sample(feat_maps["inner"], w_inner),
        ], axis=1)
    else:
        encoded = encode_sinusoidal(w_inner, cfg.posenc_bands)
        if cfg.variant == "single_surface_viewdir":
            encoded = np.concatenate([
                encoded, encode_sinusoidal(inputs.view_dirs[fg], cfg.viewdir_bands)], axis=1)
        features = bilinear_sample(feat_maps["inner"], w_inner)
    encoded = encoded.astype(dt)
    sample_ms = (time.perf_counter() - t0) * 1e3

    t0 = time.perf_counter()
    rgb, mlp_caches = mlp_forward(net, encoded, features)
    mlp_ms = (time.perf_counter() - t0) * 1e3

    H, W = maps.shape
    image = np.empty((H, W, 3), dtype=dt)
    image[:] = np.asarray(cfg.background, dtype=dt)
    image[fg] = rgb

    cache = {
        "fg": fg, "w_out": w_out, "w_inner": w_inner,
        "ext_caches": ext_caches, "mlp_caches": mlp_caches,
        "feat_resolution": cfg.bake_resolution,
    }
    stats = {
        "mlp_evals": int(rgb.shape[0]),
        "foreground_pixels": int(fg.sum()),
        "extractor_ms": extractor_ms,
        "sample_ms": sample_ms,
        "mlp_ms": mlp_ms + sample_ms,
        "mlp_only_ms": mlp_ms,
    }
    return image, cache, stats


def neural_backward(net: NetworkParameters, cache, grad_image: np.ndarray) -> dict:
    """Gradients for all parameters from an image-space gradient.

    Gradients flow through bilinear sampling into the feature maps but not into
    the UV coordinates; background pixels contribute nothing.
    """
    cfg = net.config
    fg = cache["fg"]
    grad_rgb = grad_image[fg].astype(cfg.np_dtype, copy=False)
    grads, _, grad_features = mlp_backward(net, cache["mlp_caches"], grad_rgb)
    R = cache["feat_resolution"]
    C = cfg.feature_channels
    if cfg.variant == "two_surface":
        g_out, g_in = grad_features[:, :C], grad_features[:, C:]
        gmap_out = bilinear_sample_adjoint(g_out, cache["w_out"], R, C)
        gmap_in = bilinear_sample_adjoint(g_in, cache["w_inner"], R, C)
        grads.update(extractor_backward(net, "outer", cache["ext_caches"]["outer"], gmap_out))
        grads.update(extractor_backward(net, "inner", cache["ext_caches"]["inner"], gmap_in))
    else:
        gmap_in = bilinear_sample_adjoint(grad_features, cache["w_inner"], R, C)
        grads.update(extractor_backward(net, "inner", cache["ext_caches"]["inner"], gmap_in))
    return grads


def forward_render(net: NetworkParameters, mesh: SkinnedMesh, window: MotionWindow,
                   camera: Camera, bvhs=None, uv_maps=None):
    """Full pipeline: bake, raycast, extract, sample, and one MLP pass.

    Returns (image, cache, stats) with the stage timing breakdown in stats.
    """
    inputs = prepare_frame_inputs(mesh, window, camera, net.config, bvhs, uv_maps)
    image, cache, stats = neural_forward(net, inputs)
    stats["bake_ms"] = inputs.bake_ms
    stats["raycast_ms"] = inputs.raycast_ms
    return image, cache, stats


# ---------------------------------------------------------------------------
# loss and optimizer


def l1_loss(image: np.ndarray, target: np.ndarray):
    """Mean absolute error over the full image; returns (loss, grad_image).

    The subgradient at exact ties is 0.
    """
    if image.shape != target.shape:
        raise ValueError(f"shape mismatch {image.shape} vs {target.shape}")
    diff = image.astype(np.float64) - target.astype(np.float64)
    loss = float(np.abs(diff).mean())
    grad = (np.sign(diff) / diff.size).astype(image.dtype)
    return loss, grad


def adam_step(net: NetworkParameters, grads: dict, lr: float = 2e-4,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> None:
    """Bias-corrected Adam update in place; increments the step counter."""
    net.step += 1
    t = net.step
    c1 = 1.0 - beta1 ** t
    c2 = 1.0 - beta2 ** t
    for k, p in net.params.items():
        g = grads[k]
        m = net.adam_m[k]
        v = net.adam_v[k]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * np.square(g)
        p -= (lr / c1) * m / (np.sqrt(v / c2) + eps)
