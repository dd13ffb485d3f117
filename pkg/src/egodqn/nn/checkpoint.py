"""Flat binary checkpoints for :class:`~egodqn.nn.network.QNetwork`.

Layout (all integers little-endian)::

    magic        4 bytes   b"EDQN"
    version      uint32    1
    variant_id   uint32    caller-defined network identifier
    n_layers     uint32
    per layer, in network order (branch layers, concat, head):
        kind       uint8   1 conv2d, 2 dense, 3 relu, 4 flatten, 5 concat
        branch     uint8   branch index, 255 for concat and head layers
        n_tensors  uint8   parameter tensors that follow (weights then bias)
        per tensor:
            ndim   uint8
            dims   ndim x uint32
            data   prod(dims) x float64 (little-endian, C order)

Only parameters are stored; the architecture itself is rebuilt by the
caller and checked against the stored shapes on load.
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"EDQN"
VERSION = 1
KIND_CODES = {"conv2d": 1, "dense": 2, "relu": 3, "flatten": 4, "concat": 5}
HEAD = 255


class CheckpointError(ValueError):
    pass


def _layer_entries(net):
    for b, branch in enumerate(net.branches):
        for layer in branch:
            yield b, layer
    if net.concat:
        yield HEAD, net.concat
    for layer in net.head:
        yield HEAD, layer


def dumps(net, variant_id: int) -> bytes:
    entries = list(_layer_entries(net))
    out = [MAGIC, struct.pack("<III", VERSION, variant_id, len(entries))]
    for branch, layer in entries:
        tensors = [layer.params[k] for k in ("W", "b") if k in layer.params]
        out.append(struct.pack("<BBB", KIND_CODES[layer.kind], branch, len(tensors)))
        for t in tensors:
            out.append(struct.pack("<B", t.ndim) + struct.pack(f"<{t.ndim}I", *t.shape))
            out.append(np.ascontiguousarray(t, dtype="<f8").tobytes())
    return b"".join(out)


def loads(data: bytes, net) -> int:
    """Copy parameters from ``data`` into ``net``; returns the stored variant id."""
    if data[:4] != MAGIC:
        raise CheckpointError("not an egodqn checkpoint (bad magic)")
    pos = 4
    version, variant_id, n_layers = struct.unpack_from("<III", data, pos)
    pos += 12
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    entries = list(_layer_entries(net))
    if n_layers != len(entries):
        raise CheckpointError(f"checkpoint has {n_layers} layers, network has {len(entries)}")
    loaded = []
    for branch, layer in entries:
        kind, b, n_tensors = struct.unpack_from("<BBB", data, pos)
        pos += 3
        if kind != KIND_CODES[layer.kind] or b != branch:
            raise CheckpointError(f"layer mismatch: stored kind {kind} branch {b}, expected {layer!r}")
        keys = [k for k in ("W", "b") if k in layer.params]
        if n_tensors != len(keys):
            raise CheckpointError(f"{layer!r}: expected {len(keys)} tensors, found {n_tensors}")
        for key in keys:
            (ndim,) = struct.unpack_from("<B", data, pos)
            pos += 1
            shape = struct.unpack_from(f"<{ndim}I", data, pos)
            pos += 4 * ndim
            if tuple(shape) != layer.params[key].shape:
                raise CheckpointError(f"{layer!r}.{key}: stored shape {shape}, expected {layer.params[key].shape}")
            count = int(np.prod(shape))
            values = np.frombuffer(data, dtype="<f8", count=count, offset=pos).reshape(shape)
            pos += 8 * count
            loaded.append((layer.params[key], values))
    if pos != len(data):
        raise CheckpointError(f"{len(data) - pos} trailing bytes in checkpoint")
    for dst, src in loaded:
        dst[...] = src
    return variant_id


def save(path, net, variant_id: int) -> None:
    Path(path).write_bytes(dumps(net, variant_id))


def load(path, net) -> int:
    return loads(Path(path).read_bytes(), net)
