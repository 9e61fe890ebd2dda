"""Model checkpoint files.

Layout: 8-byte magic, little-endian uint64 header length, UTF-8 JSON header,
then every array of the header's ``arrays`` list as little-endian float64 in
that order.
"""
from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path
from typing import NamedTuple

import numpy as np

from ..exceptions import CorruptionError
from .dense import Dense, DenseNet
from .losses import AngularHead

MAGIC = b"ASDCKPT1"


class Checkpoint(NamedTuple):
    nets: dict
    heads: dict
    arrays: dict
    header: dict


def checkpoint_bytes(nets: dict, heads: dict | None = None, extra: dict | None = None, seed=None, step=0,
                     arrays: dict | None = None) -> bytes:
    """Serialise nets, heads and named auxiliary arrays."""
    heads = heads or {}
    aux = arrays or {}
    arrays = []
    blobs = []

    def add(name, arr):
        arr = np.asarray(arr)
        arrays.append({"name": name, "shape": list(arr.shape), "dtype": arr.dtype.str})
        blobs.append(np.ascontiguousarray(arr, dtype="<f8").tobytes())

    net_meta = {}
    for name, net in nets.items():
        net_meta[name] = {"dims": net.dims, "activations": [layer.activation for layer in net.layers], "seed": net.seed}
        for i, layer in enumerate(net.layers):
            add(f"{name}.{i}.weights", layer.weights)
            add(f"{name}.{i}.bias", layer.bias)
    head_meta = {}
    for name, head in heads.items():
        head_meta[name] = head.config()
        add(f"{name}.centers", head.centers)
    for name, arr in aux.items():
        add(f"aux.{name}", arr)
    header = {
        "format": 1,
        "nets": net_meta,
        "heads": head_meta,
        "seed": seed,
        "step": step,
        "extra": extra or {},
        "aux": list(aux),
        "arrays": arrays,
    }
    hbytes = json.dumps(header, sort_keys=True).encode("utf-8")
    return MAGIC + struct.pack("<Q", len(hbytes)) + hbytes + b"".join(blobs)


def save_checkpoint(path, nets, heads=None, extra=None, seed=None, step=0, arrays=None) -> str:
    """Write a checkpoint and return its sha256 hex digest."""
    data = checkpoint_bytes(nets, heads, extra, seed, step, arrays)
    Path(path).write_bytes(data)
    return hashlib.sha256(data).hexdigest()


def load_checkpoint(path) -> Checkpoint:
    data = Path(path).read_bytes()
    if data[:8] != MAGIC or len(data) < 16:
        raise CorruptionError(f"{path}: not a checkpoint file")
    (hlen,) = struct.unpack("<Q", data[8:16])
    try:
        header = json.loads(data[16 : 16 + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError):
        raise CorruptionError(f"{path}: unreadable header") from None
    offset = 16 + hlen
    arrays = {}
    for spec in header["arrays"]:
        count = int(np.prod(spec["shape"], dtype=np.int64))
        end = offset + 8 * count
        if end > len(data):
            raise CorruptionError(f"{path}: parameter blob truncated at {spec['name']}")
        arr = np.frombuffer(data[offset:end], dtype="<f8").reshape(spec["shape"])
        arrays[spec["name"]] = arr.astype(np.dtype(spec["dtype"]))
        offset = end
    if offset != len(data):
        raise CorruptionError(f"{path}: {len(data) - offset} trailing bytes after parameters")
    nets = {}
    for name, meta in header["nets"].items():
        layers = [
            Dense(arrays[f"{name}.{i}.weights"], arrays[f"{name}.{i}.bias"], act)
            for i, act in enumerate(meta["activations"])
        ]
        nets[name] = DenseNet(layers, seed=meta.get("seed"))
    heads = {}
    for name, cfg in header["heads"].items():
        heads[name] = AngularHead(arrays[f"{name}.centers"], **cfg)
    aux = {name: arrays[f"aux.{name}"] for name in header.get("aux", [])}
    return Checkpoint(nets, heads, aux, header)
