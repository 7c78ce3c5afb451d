"""Normalization: plain normalizers, mask-conditioned modulation, and the
spatially-constant reductions (class-conditional scaling, style transfer).

The modulated form is

    out = gamma(m) * (h - mu) / sigma + beta(m)

where mu/sigma are channel statistics of h and gamma/beta are fields predicted
from the label map m by a small conv net. Collapsing the fields to constants
recovers the older conditional normalizers; see ClassModulation and adain.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import ops
from .autograd import Tensor
from .errors import ConfigError, DimensionError
from .layers import Conv2d, Module, Parameter
from .rng import SplitMix64

EPS = 1e-5

_AXES = {"batch": (0, 2, 3), "instance": (2, 3), "positional": (1,)}


@dataclass
class ChannelStats:
    """Per-channel mean and standard deviation (numeric, not on the tape)."""

    mu: np.ndarray
    sigma: np.ndarray


@dataclass
class ModulationField:
    gamma: Tensor
    beta: Tensor


def batch_stats(h, eps: float = EPS) -> ChannelStats:
    """mu_c, sigma_c over samples and positions; sigma includes eps under the root."""
    x = h.data if isinstance(h, Tensor) else np.asarray(h)
    if x.ndim != 4:
        raise DimensionError(f"expected (N, C, H, W), got shape {x.shape}")
    mu = x.mean(axis=(0, 2, 3))
    var = (x * x).mean(axis=(0, 2, 3)) - mu * mu
    sigma = np.sqrt(np.maximum(var, 0) + eps)
    return ChannelStats(mu=mu, sigma=sigma)


def normalize(h: Tensor, kind: str = "batch", eps: float = EPS) -> Tensor:
    """(h - mu) / sigma with statistics taken over the axes named by `kind`.

    batch: per channel, over samples and positions. instance: per sample and
    channel, over positions. positional: per position, over channels.
    Differentiable through the statistics.
    """
    if kind not in _AXES:
        raise ConfigError(f"unknown normalizer kind {kind!r}")
    if h.data.ndim != 4:
        raise DimensionError(f"expected (N, C, H, W), got shape {h.data.shape}")
    return ops.normalize(h, _AXES[kind], eps)


def normalize_reference(h: Tensor, kind: str = "batch", eps: float = EPS) -> Tensor:
    """normalize() built from elementary taped ops, one node per step.

    Slower but with no hand-derived gradient; tests check the fused op
    against it in both directions.
    """
    if kind not in _AXES:
        raise ConfigError(f"unknown normalizer kind {kind!r}")
    if h.data.ndim != 4:
        raise DimensionError(f"expected (N, C, H, W), got shape {h.data.shape}")
    axes = _AXES[kind]
    mu = ops.tmean(h, axes=axes, keepdims=True)
    centered = ops.sub(h, mu)
    var = ops.tmean(ops.mul(centered, centered), axes=axes, keepdims=True)
    sigma = ops.sqrt(ops.add(var, ops.const(np.full((1,) * 4, eps, dtype=h.data.dtype))))
    return ops.div(centered, sigma)


def instance_norm(h: Tensor, eps: float = EPS) -> Tensor:
    return normalize(h, "instance", eps)


class Spade(Module):
    """Mask-conditioned denormalization layer.

    A shared conv + relu embeds the one-hot mask, then two conv heads emit the
    gamma and beta fields at the feature resolution. forward() normalizes h
    (batch statistics by default) and applies the fields elementwise.
    """

    def __init__(
        self,
        channels: int,
        num_labels: int,
        hidden: int = 128,
        kernel: int = 3,
        kind: str = "batch",
        eps: float = EPS,
        spectral: bool = False,
        rng: SplitMix64 | None = None,
    ):
        super().__init__()
        if kind not in _AXES:
            raise ConfigError(f"unknown normalizer kind {kind!r}")
        rng = rng or SplitMix64(0)
        self.channels = channels
        self.num_labels = num_labels
        self.kind = kind
        self.eps = eps
        self.shared = Conv2d(
            num_labels, hidden, kernel, spectral=spectral, rng=rng.spawn("shared")
        )
        self.gamma_conv = Conv2d(
            hidden, channels, kernel, spectral=spectral, rng=rng.spawn("gamma")
        )
        self.beta_conv = Conv2d(
            hidden, channels, kernel, spectral=spectral, rng=rng.spawn("beta")
        )

    def modulation(self, mask_oh) -> ModulationField:
        if not isinstance(mask_oh, Tensor):
            mask_oh = ops.const(mask_oh)
        if mask_oh.data.ndim != 4 or mask_oh.data.shape[1] != self.num_labels:
            raise DimensionError(
                f"mask one-hot has shape {mask_oh.data.shape}, "
                f"expected (N, {self.num_labels}, H, W)"
            )
        emb = ops.relu(self.shared(mask_oh))
        return ModulationField(gamma=self.gamma_conv(emb), beta=self.beta_conv(emb))

    def __call__(
        self, h: Tensor, mask_oh, override: ModulationField | None = None
    ) -> Tensor:
        field = override if override is not None else self.modulation(mask_oh)
        normed = normalize(h, self.kind, self.eps)
        gshape = field.gamma.data.shape
        if gshape[-2:] != h.data.shape[-2:]:
            raise ConfigError(
                f"modulation field is {gshape[-2:]} but features are "
                f"{h.data.shape[-2:]}; resize the mask to the feature grid"
            )
        return ops.add(ops.mul(field.gamma, normed), field.beta)


class ClassModulation(Module):
    """Class-conditional batch normalization: one learned (gamma, beta) pair
    per class, constant over space. Equivalent to the mask-conditioned layer
    when the mask is uniform and the field net has a 1x1 receptive field."""

    def __init__(self, channels: int, num_classes: int, eps: float = EPS):
        super().__init__()
        self.num_classes = num_classes
        self.eps = eps
        self.gamma = Parameter(np.ones((num_classes, channels), dtype=np.float32))
        self.beta = Parameter(np.zeros((num_classes, channels), dtype=np.float32))

    def set_class(self, class_id: int, gamma: np.ndarray, beta: np.ndarray) -> None:
        self.gamma.data[class_id] = gamma
        self.beta.data[class_id] = beta

    def __call__(self, h: Tensor, class_id: int) -> Tensor:
        if not 0 <= class_id < self.num_classes:
            raise ConfigError(f"class id {class_id} out of range")
        c = h.data.shape[1]
        g = ops.reshape(ops.const(self.gamma.data[class_id]), (1, c, 1, 1))
        b = ops.reshape(ops.const(self.beta.data[class_id]), (1, c, 1, 1))
        return ops.add(ops.mul(g, normalize(h, "batch", self.eps)), b)


def adain(content: Tensor, style: ChannelStats, eps: float = EPS) -> Tensor:
    """Instance-normalize a single sample, then rescale to the style moments."""
    if content.data.shape[0] != 1:
        raise DimensionError("style transfer is defined for a single sample")
    c = content.data.shape[1]
    sig = ops.reshape(ops.const(style.sigma.astype(content.data.dtype)), (1, c, 1, 1))
    mu = ops.reshape(ops.const(style.mu.astype(content.data.dtype)), (1, c, 1, 1))
    return ops.add(ops.mul(sig, normalize(content, "instance", eps)), mu)
