"""Dataset ingestion: IDX-format image/label files and synthetic clusters.

IDX layout (big endian): images start with magic 2051, then count, rows,
cols, followed by raw uint8 pixels row-major; labels start with magic 2049,
then count, followed by raw uint8 labels.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .rng import substream

IMAGE_MAGIC = 2051
LABEL_MAGIC = 2049


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray  # (m, d) float64
    labels: np.ndarray    # (m,) values in {0, 1}
    provenance: dict

    @property
    def m(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]


def _read_be32(f) -> int:
    data = f.read(4)
    if len(data) != 4:
        raise ValueError("truncated IDX header")
    return struct.unpack(">i", data)[0]


def read_idx_images(path) -> np.ndarray:
    with open(path, "rb") as f:
        magic = _read_be32(f)
        if magic != IMAGE_MAGIC:
            raise ValueError(f"bad image magic {magic} in {path} (expected {IMAGE_MAGIC})")
        count, rows, cols = _read_be32(f), _read_be32(f), _read_be32(f)
        buf = f.read(count * rows * cols)
        if len(buf) != count * rows * cols:
            raise ValueError(f"truncated image payload in {path}")
        return np.frombuffer(buf, dtype=np.uint8).reshape(count, rows, cols)


def read_idx_labels(path) -> np.ndarray:
    with open(path, "rb") as f:
        magic = _read_be32(f)
        if magic != LABEL_MAGIC:
            raise ValueError(f"bad label magic {magic} in {path} (expected {LABEL_MAGIC})")
        count = _read_be32(f)
        buf = f.read(count)
        if len(buf) != count:
            raise ValueError(f"truncated label payload in {path}")
        return np.frombuffer(buf, dtype=np.uint8).copy()


def write_idx_images(path, images: np.ndarray) -> None:
    """Write uint8 images (count, rows, cols) in IDX layout (test fixtures)."""
    images = np.asarray(images, dtype=np.uint8)
    with open(path, "wb") as f:
        f.write(struct.pack(">iiii", IMAGE_MAGIC, *images.shape))
        f.write(images.tobytes())


def write_idx_labels(path, labels: np.ndarray) -> None:
    labels = np.asarray(labels, dtype=np.uint8)
    with open(path, "wb") as f:
        f.write(struct.pack(">ii", LABEL_MAGIC, len(labels)))
        f.write(labels.tobytes())


def ingest_mnist_idx(images_path, labels_path, class_pair=(0, 1)) -> Dataset:
    """Load an IDX image/label pair, keep two classes, binarize labels.

    Pixels scale to [0, 1] by /255; images flatten row-major to
    d = rows * cols; labels remap {first -> 0, second -> 1}.
    """
    images = read_idx_images(images_path)
    labels = read_idx_labels(labels_path)
    if images.shape[0] != labels.shape[0]:
        raise ValueError(
            f"image count {images.shape[0]} != label count {labels.shape[0]}"
        )
    a, b = class_pair
    if a == b:
        raise ValueError("class_pair must name two distinct classes")
    keep = (labels == a) | (labels == b)
    feats = images[keep].reshape(keep.sum(), -1).astype(np.float64) / 255.0
    binary = (labels[keep] == b).astype(np.float64)
    return Dataset(
        features=feats,
        labels=binary,
        provenance={"source": "mnist", "class_pair": (int(a), int(b))},
    )


def synth_dataset(m: int, d: int, seed: int = 0, separation: float = 3.0) -> Dataset:
    """Two Gaussian clusters at +/- (separation/2) u for a random unit u."""
    if m < 1 or d < 1:
        raise ValueError("need m >= 1 and d >= 1")
    rng = substream(seed, "synth-data")
    u = rng.standard_normal(d)
    u /= np.linalg.norm(u)
    labels = rng.integers(0, 2, size=m).astype(np.float64)
    centers = (labels[:, None] - 0.5) * separation * u
    feats = centers + rng.standard_normal((m, d))
    return Dataset(
        features=feats,
        labels=labels,
        provenance={"source": "synthetic", "m": m, "d": d,
                    "seed": int(seed), "separation": float(separation)},
    )
