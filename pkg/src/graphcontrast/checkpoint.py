"""Binary checkpoint serialization.

Layout: 8-byte magic ``GCCCKPT1``, an 8-byte little-endian length, a JSON
manifest (config, counters, and tensor descriptors), the tensor payloads
as little-endian float32 in manifest order, and a trailing CRC32 of
everything before it. Stored tensors are exactly the f32 state held by a
Checkpoint, so save followed by load is bit-exact.
"""

from __future__ import annotations

import dataclasses
import json
import os
import struct
import tempfile
import zlib

import numpy as np

from .contrast import ContrastConfig
from .encoder import GinConfig
from .sampling import RwrConfig
from .training import CHECKPOINT_VERSION, Checkpoint, PretrainConfig

MAGIC = b"GCCCKPT1"


class CorruptCheckpointError(ValueError):
    """File is not a readable checkpoint of a supported version."""


def config_to_dict(cfg: PretrainConfig) -> dict:
    return dataclasses.asdict(cfg)


def config_from_dict(d: dict) -> PretrainConfig:
    try:
        return PretrainConfig(
            rwr=RwrConfig(**d["rwr"]),
            gin=GinConfig(**d["gin"]),
            contrast=ContrastConfig(**d["contrast"]),
            **{k: d[k] for k in ("batch_size", "total_steps", "warmup_steps", "peak_lr",
                                 "weight_decay", "clip_norm", "checkpoint_interval", "seed")})
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptCheckpointError(f"invalid config in checkpoint manifest: {exc}") from exc


def _tensor_items(ckpt: Checkpoint):
    """(name, f32 array) pairs in the canonical serialization order."""
    for name, arr in ckpt.theta_q.items():
        yield f"theta_q.{name}", arr
    if ckpt.theta_k is not None:
        for name, arr in ckpt.theta_k.items():
            yield f"theta_k.{name}", arr
    for name, arr in ckpt.adam_m.items():
        yield f"adam.m.{name}", arr
    for name, arr in ckpt.adam_v.items():
        yield f"adam.v.{name}", arr
    if ckpt.queue_storage is not None:
        yield "queue.storage", ckpt.queue_storage


def checkpoint_bytes(ckpt: Checkpoint) -> bytes:
    tensors = list(_tensor_items(ckpt))
    manifest = {
        "version": ckpt.version,
        "step": ckpt.step,
        "adam_step_count": ckpt.adam_step_count,
        "queue_write_ptr": ckpt.queue_write_ptr,
        "queue_filled": ckpt.queue_filled,
        "config": config_to_dict(ckpt.config),
        "tensors": [{"name": name, "shape": list(arr.shape), "dtype": "f32"}
                    for name, arr in tensors],
    }
    blob = json.dumps(manifest, sort_keys=True).encode("utf-8")
    parts = [MAGIC, struct.pack("<Q", len(blob)), blob]
    for _, arr in tensors:
        parts.append(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    body = b"".join(parts)
    return body + struct.pack("<I", zlib.crc32(body))


def save_checkpoint(ckpt: Checkpoint, path) -> None:
    """Write atomically: temp file in the target directory, then rename."""
    data = checkpoint_bytes(ckpt)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_checkpoint(path) -> Checkpoint:
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < len(MAGIC) + 12 or not data.startswith(MAGIC):
        raise CorruptCheckpointError(f"{path}: not a checkpoint file (bad magic)")
    body, crc_bytes = data[:-4], data[-4:]
    if struct.unpack("<I", crc_bytes)[0] != zlib.crc32(body):
        raise CorruptCheckpointError(f"{path}: CRC mismatch, file is corrupt")
    (blob_len,) = struct.unpack("<Q", data[8:16])
    manifest_end = 16 + blob_len
    if manifest_end > len(body):
        raise CorruptCheckpointError(f"{path}: manifest length exceeds file size")
    try:
        manifest = json.loads(body[16:manifest_end].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CorruptCheckpointError(f"{path}: unreadable manifest: {exc}") from exc
    version = manifest.get("version")
    if version != CHECKPOINT_VERSION:
        raise CorruptCheckpointError(
            f"{path}: unsupported checkpoint version {version!r} (expected {CHECKPOINT_VERSION})")

    arrays = {}
    offset = manifest_end
    for desc in manifest["tensors"]:
        shape = tuple(desc["shape"])
        if desc.get("dtype") != "f32":
            raise CorruptCheckpointError(f"{path}: unknown tensor dtype {desc.get('dtype')!r}")
        nbytes = int(np.prod(shape)) * 4
        chunk = body[offset:offset + nbytes]
        if len(chunk) != nbytes:
            raise CorruptCheckpointError(f"{path}: truncated tensor payload for {desc['name']}")
        arrays[desc["name"]] = np.frombuffer(chunk, dtype="<f4").reshape(shape).copy()
        offset += nbytes
    if offset != len(body):
        raise CorruptCheckpointError(f"{path}: {len(body) - offset} trailing bytes after tensors")

    cfg = config_from_dict(manifest["config"])

    def collect(prefix: str) -> dict:
        plen = len(prefix)
        return {name[plen:]: arr for name, arr in arrays.items() if name.startswith(prefix)}

    theta_q = collect("theta_q.")
    theta_k = collect("theta_k.") or None
    queue = arrays.get("queue.storage")
    return Checkpoint(config=cfg, step=int(manifest["step"]),
                      theta_q=theta_q, theta_k=theta_k,
                      adam_m=collect("adam.m."), adam_v=collect("adam.v."),
                      adam_step_count=int(manifest["adam_step_count"]),
                      queue_storage=queue,
                      queue_write_ptr=int(manifest["queue_write_ptr"]),
                      queue_filled=int(manifest["queue_filled"]),
                      version=int(version))
