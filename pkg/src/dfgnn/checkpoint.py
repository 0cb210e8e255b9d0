"""Binary checkpoint format.

Layout (little-endian)::

    b"DFGN"                      magic
    u32                          format version
    u32 + bytes                  UTF-8 JSON config/metadata block
    u32                          tensor count
    per tensor:
        u32 + bytes              UTF-8 name
        u8                       dtype code (1 = float64)
        u32                      ndim
        u64 * ndim               dims
    raw float64 data, tensors in directory order
"""

from __future__ import annotations

import io
import json
import struct
from dataclasses import asdict, dataclass, field

import numpy as np

from .model import Model, ModelConfig, param_shapes

MAGIC = b"DFGN"
VERSION = 1
DTYPE_F64 = 1


class CheckpointError(ValueError):
    pass


@dataclass
class Checkpoint:
    model: Model
    adam: "object | None" = None
    epoch: int = 0
    best_metric: float = float("-inf")
    rng_state: dict | None = None
    meta: dict = field(default_factory=dict)


def _tensors(ckpt: Checkpoint):
    out = [(f"param/{k}", v) for k, v in ckpt.model.params.items()]
    if ckpt.adam is not None:
        out += [(f"adam_m/{k}", v) for k, v in ckpt.adam.m.items()]
        out += [(f"adam_v/{k}", v) for k, v in ckpt.adam.v.items()]
    return out


def _header(ckpt: Checkpoint) -> dict:
    head = {
        "model_config": asdict(ckpt.model.config),
        "num_nodes": ckpt.model.num_nodes,
        "epoch": ckpt.epoch,
        "best_metric": ckpt.best_metric,
        "rng_state": ckpt.rng_state,
        "meta": ckpt.meta,
        "adam": None,
    }
    if ckpt.adam is not None:
        a = ckpt.adam
        head["adam"] = {"t": a.t, "beta1": a.beta1, "beta2": a.beta2, "eps": a.eps}
    return head


def dumps(ckpt: Checkpoint) -> bytes:
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<I", VERSION))
    head = json.dumps(_header(ckpt), sort_keys=True, separators=(",", ":")).encode("utf-8")
    buf.write(struct.pack("<I", len(head)))
    buf.write(head)
    tensors = _tensors(ckpt)
    buf.write(struct.pack("<I", len(tensors)))
    for name, arr in tensors:
        nb = name.encode("utf-8")
        buf.write(struct.pack("<I", len(nb)))
        buf.write(nb)
        buf.write(struct.pack("<BI", DTYPE_F64, arr.ndim))
        buf.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
    for _, arr in tensors:
        buf.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    return buf.getvalue()


def save_checkpoint(ckpt: Checkpoint, sink):
    """Write to a path or a binary file object."""
    data = dumps(ckpt)
    if hasattr(sink, "write"):
        sink.write(data)
    else:
        with open(sink, "wb") as fh:
            fh.write(data)


class _Reader:
    def __init__(self, data):
        self.data = data
        self.pos = 0

    def take(self, n, what):
        if self.pos + n > len(self.data):
            raise CheckpointError(f"truncated checkpoint while reading {what}")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt, what):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))


def loads(data: bytes) -> Checkpoint:
    from .trainer import AdamState

    r = _Reader(data)
    if r.take(4, "magic") != MAGIC:
        raise CheckpointError("bad magic: not a DFGN checkpoint")
    (version,) = r.unpack("<I", "version")
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version} (expected {VERSION})")
    (hlen,) = r.unpack("<I", "config length")
    try:
        head = json.loads(r.take(hlen, "config block").decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"corrupt config block: {exc}") from None
    (count,) = r.unpack("<I", "tensor count")
    directory = []
    for _ in range(count):
        (nlen,) = r.unpack("<I", "tensor name length")
        name = r.take(nlen, "tensor name").decode("utf-8")
        dtype, ndim = r.unpack("<BI", f"header of tensor {name}")
        if dtype != DTYPE_F64:
            raise CheckpointError(f"tensor {name}: unsupported dtype code {dtype}")
        dims = r.unpack(f"<{ndim}Q", f"dims of tensor {name}")
        directory.append((name, tuple(int(d) for d in dims)))
    tensors = {}
    for name, dims in directory:
        nbytes = 8 * int(np.prod(dims, dtype=np.int64))
        if r.pos + nbytes > len(data):
            raise CheckpointError(f"truncated data for tensor {name}")
        tensors[name] = np.frombuffer(r.take(nbytes, name), dtype="<f8").reshape(dims).astype(np.float64)
    if r.pos != len(data):
        raise CheckpointError(f"{len(data) - r.pos} trailing bytes after tensor data")

    cfg = ModelConfig(**head["model_config"])
    num_nodes = int(head["num_nodes"])
    expected = param_shapes(cfg, num_nodes)
    params = {}
    for k, shape in expected.items():
        arr = tensors.get(f"param/{k}")
        if arr is None:
            raise CheckpointError(f"missing tensor param/{k}")
        if arr.shape != tuple(shape):
            raise CheckpointError(f"tensor param/{k} has shape {arr.shape}, config implies {shape}")
        params[k] = arr
    extra = [n for n in tensors if n.startswith("param/") and n[6:] not in expected]
    if extra:
        raise CheckpointError(f"unexpected tensors for config: {extra}")
    adam = None
    if head.get("adam") is not None:
        a = head["adam"]
        missing = [f"{p}/{k}" for p in ("adam_m", "adam_v") for k in expected
                   if f"{p}/{k}" not in tensors]
        if missing:
            raise CheckpointError(f"missing optimizer tensors: {missing[:3]}")
        m = {k: tensors[f"adam_m/{k}"] for k in expected}
        v = {k: tensors[f"adam_v/{k}"] for k in expected}
        adam = AdamState(m, v, a["t"], a["beta1"], a["beta2"], a["eps"])
    model = Model(cfg, num_nodes, params)
    return Checkpoint(model, adam, head["epoch"], head["best_metric"], head["rng_state"],
                      head.get("meta") or {})


def load_checkpoint(source) -> Checkpoint:
    if hasattr(source, "read"):
        return loads(source.read())
    with open(source, "rb") as fh:
        return loads(fh.read())
