"""Evaluation: oracle segmentation of synthetic images, IoU/accuracy, and a
Fréchet distance over the frozen feature extractor (reported as fd_star; not
comparable to any pretrained-network score)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autograd import Tensor, no_grad
from .errors import DimensionError
from .masks import SegMask

GATE_TAU = 0.35  # neighbors further than this (max over channels) are edges


def oracle_segment(image, textures) -> SegMask:
    """Nearest-base-color classification after edge-aware 3x3 averaging.

    A neighbor joins the average only when it sits within GATE_TAU of the
    center in every channel; a plain box filter would blend colors across
    region borders and mislabel corner pixels even on clean input.
    """
    x = image.data if isinstance(image, Tensor) else np.asarray(image)
    if x.ndim == 4:
        x = x[0]
    if x.ndim != 3 or x.shape[0] != 3:
        raise DimensionError(f"expected (3, H, W) image, got shape {x.shape}")
    x = x.astype(np.float64)
    padded = np.pad(x, ((0, 0), (1, 1), (1, 1)), mode="edge")
    h, w = x.shape[1:]
    acc = np.zeros_like(x)
    cnt = np.zeros((h, w), dtype=np.float64)
    for dy in range(3):
        for dx in range(3):
            nbr = padded[:, dy : dy + h, dx : dx + w]
            inside = np.max(np.abs(nbr - x), axis=0) <= GATE_TAU
            acc += nbr * inside
            cnt += inside
    avg = acc / cnt  # center always qualifies, cnt >= 1
    base = np.asarray(textures.base, dtype=np.float64)  # (L, 3)
    d2 = ((avg[None, :, :, :] - base[:, :, None, None]) ** 2).sum(axis=1)
    return SegMask(np.argmin(d2, axis=0), base.shape[0])


def confusion_matrix(gt: SegMask, pred: SegMask) -> np.ndarray:
    """counts[i, j] = pixels with ground truth i predicted j."""
    if gt.shape != pred.shape:
        raise DimensionError(f"mask shapes differ: {gt.shape} vs {pred.shape}")
    L = max(gt.num_labels, pred.num_labels)
    idx = gt.labels.ravel() * L + pred.labels.ravel()
    return np.bincount(idx, minlength=L * L).reshape(L, L)


def miou(pred: SegMask, gt: SegMask) -> float:
    """Mean IoU over labels present in ground truth or prediction."""
    cm = confusion_matrix(gt, pred)
    tp = np.diag(cm).astype(np.float64)
    union = cm.sum(axis=0) + cm.sum(axis=1) - tp
    present = union > 0
    return float(np.mean(tp[present] / union[present]))


def pixel_accuracy(pred: SegMask, gt: SegMask) -> float:
    cm = confusion_matrix(gt, pred)
    return float(np.diag(cm).sum() / cm.sum())


@dataclass
class GaussianStats:
    mean: np.ndarray
    cov: np.ndarray
    sample_count: int

    def __post_init__(self):
        if self.sample_count < 2:
            raise DimensionError("need at least 2 samples for covariance")
        if np.max(np.abs(self.cov - self.cov.T)) > 1e-10:
            raise DimensionError("covariance not symmetric")


def feature_stats(images, feature_net) -> GaussianStats:
    """Gaussian fit to pooled final-stage features of an image batch."""
    x = images.data if isinstance(images, Tensor) else np.asarray(images)
    if x.ndim != 4 or x.shape[0] < 2:
        raise DimensionError(f"need a (N>=2, 3, H, W) batch, got shape {x.shape}")
    with no_grad():
        feats = feature_net.embed(Tensor(x.astype(np.float64))).data
    mean = feats.mean(axis=0)
    cov = np.cov(feats, rowvar=False, bias=False)
    cov = np.atleast_2d((cov + cov.T) / 2)
    return GaussianStats(mean=mean, cov=cov, sample_count=x.shape[0])


def _psd_sqrt(m: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh((m + m.T) / 2)
    vals = np.clip(vals, 0, None)
    return (vecs * np.sqrt(vals)) @ vecs.T


def frechet_distance(a: GaussianStats, b: GaussianStats) -> float:
    """||mu_a - mu_b||^2 + Tr(Ca + Cb - 2 (Ca Cb)^{1/2}).

    The cross root is computed as the eigendecomposition of the symmetrized
    product Ca^{1/2} Cb Ca^{1/2}; eigenvalues below zero are clamped.
    """
    if a.mean.shape != b.mean.shape or a.cov.shape != b.cov.shape:
        raise DimensionError("statistics dimensions differ")
    for s in (a, b):
        if not (np.all(np.isfinite(s.mean)) and np.all(np.isfinite(s.cov))):
            raise DimensionError("non-finite statistics")
    delta = a.mean - b.mean
    ra = _psd_sqrt(a.cov)
    inner = ra @ b.cov @ ra
    vals = np.linalg.eigvalsh((inner + inner.T) / 2)
    tr_cross = np.sqrt(np.clip(vals, 0, None)).sum()
    fd = float(delta @ delta + np.trace(a.cov) + np.trace(b.cov) - 2 * tr_cross)
    return max(fd, 0.0)


def save_report(path: str, values: dict, confusion: np.ndarray | None = None) -> None:
    """key=value lines; the confusion matrix goes next to it as CSV."""
    with open(path, "w") as fh:
        for k, v in values.items():
            fh.write(f"{k}={v:.10g}\n" if isinstance(v, float) else f"{k}={v}\n")
    if confusion is not None:
        with open(path + ".confusion.csv", "w") as fh:
            for row in confusion:
                fh.write(",".join(str(int(c)) for c in row) + "\n")
