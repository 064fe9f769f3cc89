"""Image datasets: container plus a seeded synthetic generator."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..rng import stream


@dataclass
class ImageDataset:
    images: np.ndarray
    labels: np.ndarray
    num_classes: int
    split: str = "train"

    def __post_init__(self):
        self.images = np.asarray(self.images, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        self.validate()

    def validate(self) -> None:
        if self.images.ndim != 4:
            raise ValueError(f"images must be [n, c, h, w], got {self.images.shape}")
        if self.images.shape[0] == 0:
            raise ValueError("dataset is empty")
        if self.labels.shape != (self.images.shape[0],):
            raise ValueError(f"{self.labels.shape[0]} labels for {self.images.shape[0]} images")
        if not np.all(np.isfinite(self.images)) or self.images.min() < 0 or self.images.max() > 1:
            raise ValueError("pixel values must lie in [0, 1]")
        if self.labels.min() < 0 or self.labels.max() >= self.num_classes:
            raise ValueError(f"labels outside [0, {self.num_classes})")

    def __len__(self):
        return self.images.shape[0]

    @property
    def image_shape(self):
        return self.images.shape[1:]

    def subset(self, idx, split=None) -> "ImageDataset":
        idx = np.asarray(idx)
        return ImageDataset(self.images[idx], self.labels[idx], self.num_classes, split or self.split)

    def train_test_split(self, test_fraction: float = 0.3, seed: int = 0):
        rng = stream(seed, "data/split")
        order = rng.permutation(len(self))
        k = int(round(len(self) * (1 - test_fraction)))
        return self.subset(order[:k], "train"), self.subset(order[k:], "test")


def _bump_centers(classes: int, h: int, w: int) -> np.ndarray:
    radius = 0.3 * min(h, w)
    angles = 2 * np.pi * np.arange(classes) / classes
    cy, cx = (h - 1) / 2, (w - 1) / 2
    return np.stack([cy + radius * np.sin(angles), cx + radius * np.cos(angles)], axis=1)


def make_blobs(
    n_per_class: int,
    classes: int = 2,
    image_shape=(1, 8, 8),
    separation: float = 1.0,
    noise: float = 0.15,
    width: float | None = None,
    background: float = 0.25,
    seed: int = 0,
) -> ImageDataset:
    """Class-``c`` images are a Gaussian bump at a class-specific location.

    Pixel = clip(background + separation·bump_c + noise·N(0, 1), 0, 1), the
    bump peaking at 1 with spatial width ``width`` (default a sixth of the
    image side). Classes are linearly separable once ``separation`` dominates
    the noise.
    """
    if n_per_class < 1:
        raise ValueError(f"n_per_class must be >= 1, got {n_per_class} (empty dataset)")
    if classes < 2:
        raise ValueError(f"need at least 2 classes, got {classes}")
    if not separation > 0:
        raise ValueError(f"separation must be > 0, got {separation}")
    if noise < 0:
        raise ValueError(f"noise must be >= 0, got {noise}")
    c, h, w = (int(s) for s in image_shape)
    width = width or max(min(h, w) / 6.0, 0.5)
    rng = stream(seed, "data/blobs")
    yy, xx = np.mgrid[0:h, 0:w]
    bumps = np.stack(
        [np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2 * width**2)) for cy, cx in _bump_centers(classes, h, w)]
    )
    labels = np.repeat(np.arange(classes), n_per_class)
    base = background + separation * bumps[labels][:, None, :, :]
    images = np.clip(base + noise * rng.standard_normal((labels.size, c, h, w)), 0.0, 1.0)
    order = rng.permutation(labels.size)
    return ImageDataset(images[order], labels[order], classes, split="synthetic")
