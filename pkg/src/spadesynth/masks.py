"""Integer label maps, one-hot encoding, and the multi-scale pyramid."""

from __future__ import annotations

import math

import numpy as np

from .errors import ConfigError, DimensionError


class SegMask:
    """Label grid with values in {0..num_labels-1}."""

    def __init__(self, labels: np.ndarray, num_labels: int):
        labels = np.asarray(labels)
        if labels.ndim != 2:
            raise DimensionError(f"mask must be 2-d, got shape {labels.shape}")
        if labels.size and int(labels.max()) >= num_labels:
            raise ConfigError(
                f"mask contains label {int(labels.max())} >= num_labels {num_labels}"
            )
        if labels.size and int(labels.min()) < 0:
            raise ConfigError("mask contains negative labels")
        self.labels = labels.astype(np.int64)
        self.num_labels = num_labels

    @property
    def shape(self):
        return self.labels.shape

    def onehot(self, dtype=np.float32) -> np.ndarray:
        """One-hot planes, shape (1, L, H, W); rows sum to exactly 1."""
        h, w = self.labels.shape
        out = np.zeros((1, self.num_labels, h, w), dtype=dtype)
        yy, xx = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
        out[0, self.labels, yy, xx] = 1
        return out

    def downsample(self) -> "SegMask":
        # top-left sample of each 2x2 cell; keeps labels hard
        return SegMask(self.labels[0::2, 0::2], self.num_labels)

    def __eq__(self, other):
        return (
            isinstance(other, SegMask)
            and self.num_labels == other.num_labels
            and np.array_equal(self.labels, other.labels)
        )


def uniform_mask(label: int, size: int, num_labels: int) -> SegMask:
    return SegMask(np.full((size, size), label, dtype=np.int64), num_labels)


def mask_pyramid(mask: SegMask, levels: int) -> list[SegMask]:
    """[mask, mask/2, ..., mask/2^levels], nearest-neighbor on raw labels."""
    h, w = mask.shape
    if levels > int(math.log2(min(h, w))):
        raise ConfigError(
            f"{levels} pyramid levels too deep for a {h}x{w} mask"
        )
    out = [mask]
    for _ in range(levels):
        out.append(out[-1].downsample())
    return out


def batch_onehot(masks: list[SegMask], dtype=np.float32) -> np.ndarray:
    """Stack per-sample one-hots into (N, L, H, W)."""
    return np.concatenate([m.onehot(dtype) for m in masks], axis=0)


def batch_pyramid(masks: list[SegMask], levels: int, dtype=np.float32) -> list[np.ndarray]:
    """One-hot batches from coarsest (index 0) to finest (index levels)."""
    pyrs = [mask_pyramid(m, levels) for m in masks]
    out = []
    for lev in range(levels, -1, -1):
        out.append(batch_onehot([p[lev] for p in pyrs], dtype))
    return out
