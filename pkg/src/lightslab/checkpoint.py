"""Checkpoint serialization: little-endian binary with named f32 tensor records.

Layout: magic "DLFS", version u32, 32-byte config digest, config JSON record,
then tensor records {name_len u32, name utf8, rank u32, dims u32 * rank, f32 data}.
Adam state is stored under "<name>.m" / "<name>.v"; "optimizer.step" is a scalar.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .model import ModelConfig, NetworkParameters

MAGIC = b"DLFS"
VERSION = 1


class CheckpointError(Exception):
    pass


def _write_record(fh, name: str, arr: np.ndarray) -> None:
    nb = name.encode()
    fh.write(struct.pack("<I", len(nb)))
    fh.write(nb)
    arr = np.atleast_1d(np.asarray(arr))
    fh.write(struct.pack("<I", arr.ndim))
    fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
    fh.write(arr.astype("<f4").tobytes())


def _read_record(fh):
    head = fh.read(4)
    if len(head) < 4:
        return None
    (n,) = struct.unpack("<I", head)
    name = fh.read(n).decode()
    (rank,) = struct.unpack("<I", fh.read(4))
    dims = struct.unpack(f"<{rank}I", fh.read(4 * rank))
    count = int(np.prod(dims)) if rank else 1
    data = np.frombuffer(fh.read(4 * count), dtype="<f4").reshape(dims)
    return name, data


def save_checkpoint(net: NetworkParameters, path) -> None:
    cfg_json = json.dumps(net.config.to_dict(), sort_keys=True)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", VERSION))
        fh.write(net.config.digest())
        _write_record(fh, "__config__", np.frombuffer(cfg_json.encode(), dtype=np.uint8).astype(np.float32))
        for name, arr in net.params.items():
            _write_record(fh, name, arr)
            _write_record(fh, name + ".m", net.adam_m[name])
            _write_record(fh, name + ".v", net.adam_v[name])
        _write_record(fh, "optimizer.step", np.array([net.step], dtype=np.float32))


def load_checkpoint(path, expect_digest: bytes = None) -> NetworkParameters:
    path = Path(path)
    with open(path, "rb") as fh:
        if fh.read(4) != MAGIC:
            raise CheckpointError(f"{path}: not a checkpoint (bad magic)")
        (version,) = struct.unpack("<I", fh.read(4))
        if version != VERSION:
            raise CheckpointError(f"{path}: unsupported version {version}")
        digest = fh.read(32)
        if expect_digest is not None and digest != expect_digest:
            raise CheckpointError(
                f"{path}: config digest mismatch (checkpoint was trained under a different configuration)")
        records = {}
        while True:
            rec = _read_record(fh)
            if rec is None:
                break
            records[rec[0]] = rec[1]
    cfg_json = bytes(records.pop("__config__").astype(np.uint8)).decode()
    config = ModelConfig.from_dict(json.loads(cfg_json))
    if config.digest() != digest:
        raise CheckpointError(f"{path}: embedded config does not match its digest")
    dt = config.np_dtype
    step = int(records.pop("optimizer.step")[0])
    params, m, v = {}, {}, {}
    for name, data in records.items():
        if name.endswith(".m"):
            m[name[:-2]] = data.astype(dt)
        elif name.endswith(".v"):
            v[name[:-2]] = data.astype(dt)
        else:
            params[name] = data.astype(dt)
    net = NetworkParameters(config, params, m, v, step)
    missing = set(params) - set(m) | set(params) - set(v)
    if missing:
        raise CheckpointError(f"{path}: missing Adam state for {sorted(missing)[:3]}")
    return net
