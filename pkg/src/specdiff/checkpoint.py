"""Self-contained binary checkpoints.

Layout (all integers little-endian):

    b"SPDFCKPT"  u32 format version
    u64 manifest length, manifest (UTF-8 JSON text)
    u32 record count, then per record:
        u32 name length, name (UTF-8)
        u8 dtype code, u32 ndim, u64 * ndim shape
        u64 payload length, payload (little-endian, C order)

The manifest holds the run configuration text, step counter, optimizer
hyper-parameters and the bit-generator state. Tensors are written as raw
bytes, so a round trip is bit-exact.
"""
from __future__ import annotations

import io
import json
import os
import struct
import tempfile
from dataclasses import dataclass

import numpy as np

from .config import RunConfig, parse_config
from .objective import AdamState

MAGIC = b"SPDFCKPT"
FORMAT_VERSION = 1
DTYPES = {0: "<f8", 1: "<f4", 2: "<i8"}
DTYPE_CODES = {np.dtype(v): k for k, v in DTYPES.items()}


class CheckpointError(ValueError):
    pass


@dataclass
class Checkpoint:
    config: RunConfig
    params: dict
    opt_state: AdamState
    step: int
    rng_state: dict
    normalization: dict  # channel_mean, channel_std, sample_means
    format_version: int = FORMAT_VERSION
    command: str = ""


def _write_tensor(buf, name, arr):
    arr = np.asarray(arr)
    dt = np.dtype(arr.dtype).newbyteorder("<")
    if dt not in DTYPE_CODES:
        arr = arr.astype("<f8")
        dt = np.dtype("<f8")
    data = np.ascontiguousarray(arr, dtype=dt).tobytes()
    nb = name.encode("utf-8")
    buf.write(struct.pack("<I", len(nb)) + nb)
    buf.write(struct.pack("<BI", DTYPE_CODES[dt], arr.ndim))
    buf.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
    buf.write(struct.pack("<Q", len(data)) + data)


def _read_exact(fh, n, what):
    b = fh.read(n)
    if len(b) != n:
        raise CheckpointError(f"truncated checkpoint while reading {what}")
    return b


def _read_tensor(fh):
    (n,) = struct.unpack("<I", _read_exact(fh, 4, "name length"))
    name = _read_exact(fh, n, "name").decode("utf-8")
    code, ndim = struct.unpack("<BI", _read_exact(fh, 5, f"{name} header"))
    if code not in DTYPES:
        raise CheckpointError(f"{name}: unknown dtype code {code}")
    shape = struct.unpack(f"<{ndim}Q", _read_exact(fh, 8 * ndim, f"{name} shape"))
    (nbytes,) = struct.unpack("<Q", _read_exact(fh, 8, f"{name} size"))
    arr = np.frombuffer(_read_exact(fh, nbytes, f"{name} payload"), dtype=DTYPES[code]).reshape(shape)
    return name, arr.astype(arr.dtype.newbyteorder("="))


def serialize(ck: Checkpoint) -> bytes:
    manifest = {
        "format_version": ck.format_version,
        "config": ck.config.to_text(),
        "step": ck.step,
        "rng_state": ck.rng_state,
        "optimizer": {"lr": ck.opt_state.lr, "beta1": ck.opt_state.beta1, "beta2": ck.opt_state.beta2, "eps": ck.opt_state.eps, "step": ck.opt_state.step},
        "command": ck.command,
    }
    tensors = [(f"param/{k}", v) for k, v in ck.params.items()]
    tensors += [(f"adam.m/{k}", v) for k, v in ck.opt_state.m.items()]
    tensors += [(f"adam.v/{k}", v) for k, v in ck.opt_state.v.items()]
    tensors += [(f"norm/{k}", v) for k, v in ck.normalization.items()]
    buf = io.BytesIO()
    mb = json.dumps(manifest, sort_keys=True).encode("utf-8")
    buf.write(MAGIC + struct.pack("<I", FORMAT_VERSION))
    buf.write(struct.pack("<Q", len(mb)) + mb)
    buf.write(struct.pack("<I", len(tensors)))
    for name, arr in tensors:
        _write_tensor(buf, name, arr)
    return buf.getvalue()


def deserialize(blob: bytes) -> Checkpoint:
    fh = io.BytesIO(blob)
    if _read_exact(fh, 8, "magic") != MAGIC:
        raise CheckpointError("not a checkpoint file (bad magic)")
    (version,) = struct.unpack("<I", _read_exact(fh, 4, "version"))
    if version != FORMAT_VERSION:
        raise CheckpointError(f"unsupported checkpoint format version {version}")
    (mlen,) = struct.unpack("<Q", _read_exact(fh, 8, "manifest length"))
    manifest = json.loads(_read_exact(fh, mlen, "manifest").decode("utf-8"))
    (count,) = struct.unpack("<I", _read_exact(fh, 4, "record count"))
    groups = {"param": {}, "adam.m": {}, "adam.v": {}, "norm": {}}
    for _ in range(count):
        name, arr = _read_tensor(fh)
        g, _, key = name.partition("/")
        if g not in groups:
            raise CheckpointError(f"unknown record group in {name!r}")
        groups[g][key] = arr
    opt = manifest["optimizer"]
    state = AdamState(opt["lr"], opt["beta1"], opt["beta2"], opt["eps"], opt["step"], groups["adam.m"], groups["adam.v"])
    return Checkpoint(
        config=parse_config(manifest["config"]),
        params=groups["param"],
        opt_state=state,
        step=int(manifest["step"]),
        rng_state=manifest["rng_state"],
        normalization=groups["norm"],
        format_version=version,
        command=manifest.get("command", ""),
    )


def save(ck: Checkpoint, path):
    """Atomic write: temp file in the target directory, then rename."""
    path = os.fspath(path)
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-ckpt-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(serialize(ck))
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def load(path) -> Checkpoint:
    with open(path, "rb") as fh:
        return deserialize(fh.read())
