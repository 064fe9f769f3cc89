"""Checkpoint files.

Layout: the magic bytes ``ADVB1``, a newline, one line of compact JSON
(architecture, input shape, parameter shapes, seed and free-form metadata),
a newline, then every parameter as raw little-endian float64 in layer order.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .network import Network, network_from_architecture

MAGIC = b"ADVB1"


class CheckpointError(ValueError):
    pass


def save_network(network: Network, path, meta: dict | None = None) -> Path:
    path = Path(path)
    params = network.get_weights()
    header = {
        "architecture": network.architecture(),
        "input_shape": list(network.input_shape),
        "num_classes": network.num_classes,
        "seed": network.seed,
        "shapes": [list(p.shape) for p in params],
        "meta": meta or {},
    }
    with open(path, "wb") as fh:
        fh.write(MAGIC + b"\n")
        fh.write(json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8") + b"\n")
        for p in params:
            fh.write(np.ascontiguousarray(p, dtype="<f8").tobytes())
    return path


def read_checkpoint(path) -> tuple[dict, list[np.ndarray]]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"checkpoint not found: {path}")
    raw = path.read_bytes()
    if not raw.startswith(MAGIC + b"\n"):
        raise CheckpointError(f"{path}: bad magic {raw[:5]!r}, expected {MAGIC!r}")
    end = raw.index(b"\n", len(MAGIC) + 1)
    header = json.loads(raw[len(MAGIC) + 1 : end].decode("utf-8"))
    blob = raw[end + 1 :]
    arrays, offset = [], 0
    for shape in header["shapes"]:
        count = int(np.prod(shape))
        nbytes = 8 * count
        if offset + nbytes > len(blob):
            raise CheckpointError(f"{path}: truncated parameter data")
        arrays.append(np.frombuffer(blob, dtype="<f8", count=count, offset=offset).reshape(shape).astype(np.float64))
        offset += nbytes
    if offset != len(blob):
        raise CheckpointError(f"{path}: {len(blob) - offset} trailing bytes")
    return header, arrays


def load_network(path) -> tuple[Network, dict]:
    header, arrays = read_checkpoint(path)
    net = network_from_architecture(header["architecture"], header["input_shape"], seed=header.get("seed"))
    net.set_weights(arrays)
    return net, header
