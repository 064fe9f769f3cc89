"""IDX (MNIST) binary decoding."""

from __future__ import annotations

import gzip
import os
import struct
from pathlib import Path

import numpy as np

LABEL_MAGIC = 0x00000801
IMAGE_MAGIC = 0x00000803

MNIST_FILES = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}


class IdxFormatError(ValueError):
    pass


def parse_idx(data: bytes) -> np.ndarray:
    """Decode an IDX label or image file.

    Labels (magic 0x00000801) come back as int64 ``[n]``; images (magic
    0x00000803) as float64 ``[n, 1, rows, cols]`` scaled by 1/255.
    """
    if len(data) < 4:
        raise IdxFormatError(f"IDX stream too short for a header ({len(data)} bytes)")
    (magic,) = struct.unpack(">I", data[:4])
    if magic == LABEL_MAGIC:
        header = 8
        if len(data) < header:
            raise IdxFormatError(f"truncated IDX label header: expected {header} bytes, got {len(data)}")
        (n,) = struct.unpack(">I", data[4:8])
        shape = (n,)
    elif magic == IMAGE_MAGIC:
        header = 16
        if len(data) < header:
            raise IdxFormatError(f"truncated IDX image header: expected {header} bytes, got {len(data)}")
        n, rows, cols = struct.unpack(">III", data[4:16])
        shape = (n, rows, cols)
    else:
        raise IdxFormatError(
            f"bad IDX magic 0x{magic:08x}; expected 0x{LABEL_MAGIC:08x} (labels) or 0x{IMAGE_MAGIC:08x} (images)"
        )
    expected = int(np.prod(shape))
    payload = data[header:]
    if len(payload) != expected:
        raise IdxFormatError(f"IDX payload length mismatch: expected {expected} bytes, got {len(payload)}")
    values = np.frombuffer(payload, dtype=np.uint8).reshape(shape)
    if magic == LABEL_MAGIC:
        return values.astype(np.int64)
    return (values.astype(np.float64) / 255.0)[:, None, :, :]


def read_idx(path) -> np.ndarray:
    path = Path(path)
    raw = path.read_bytes()
    if raw[:2] == b"\x1f\x8b":
        raw = gzip.decompress(raw)
    return parse_idx(raw)


def data_root(root=None) -> Path:
    return Path(root or os.environ.get("ADVBENCH_DATA", "data"))


def find_mnist_file(name: str, root=None) -> Path | None:
    base = data_root(root)
    for candidate in (base / name, base / (name + ".gz"), base / "MNIST" / "raw" / name, base / "MNIST" / "raw" / (name + ".gz")):
        if candidate.exists():
            return candidate
    return None


def load_mnist(split: str = "train", root=None, limit: int | None = None):
    """Images and labels of an MNIST split from local IDX files."""
    from .images import ImageDataset

    if split not in MNIST_FILES:
        raise ValueError(f"split must be 'train' or 'test', got {split!r}")
    names = MNIST_FILES[split]
    paths = [find_mnist_file(n, root) for n in names]
    missing = [n for n, p in zip(names, paths) if p is None]
    if missing:
        raise FileNotFoundError(f"MNIST files not found under {data_root(root)}: {', '.join(missing)}")
    images, labels = read_idx(paths[0]), read_idx(paths[1])
    if limit is not None:
        images, labels = images[:limit], labels[:limit]
    return ImageDataset(images, labels, 10, split=split)
