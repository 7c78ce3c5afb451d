"""Training objective: hinge adversarial terms, discriminator feature
matching, perceptual distance over the frozen feature net, and the Gaussian
KL term with reparameterized sampling."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import ops
from .autograd import Tensor
from .errors import ConfigError, DimensionError
from .rng import SplitMix64

LOGVAR_LIMIT = 20.0  # exp(20) ~ 5e8 keeps float32 finite


@dataclass
class LossWeights:
    w_gan: float = 1.0
    w_feat: float = 10.0
    w_perc: float = 10.0
    w_kld: float = 0.05

    def __post_init__(self):
        for k, v in vars(self).items():
            if v < 0:
                raise ConfigError(f"loss weight {k} must be nonnegative, got {v}")


def _mean_all(t: Tensor) -> Tensor:
    return ops.tmean(t)


def _as_list(x) -> list[Tensor]:
    return [x] if isinstance(x, Tensor) else list(x)


def hinge_d(logits_real, logits_fake) -> Tensor:
    """mean(relu(1 - r)) + mean(relu(1 + f)), averaged over scales."""
    logits_real, logits_fake = _as_list(logits_real), _as_list(logits_fake)
    if len(logits_real) != len(logits_fake) or not logits_real:
        raise DimensionError("real and fake logit lists must align and be non-empty")
    total = None
    for r, f in zip(logits_real, logits_fake):
        one_r = ops.const(np.ones_like(r.data))
        one_f = ops.const(np.ones_like(f.data))
        term = ops.add(
            _mean_all(ops.relu(ops.sub(one_r, r))),
            _mean_all(ops.relu(ops.add(one_f, f))),
        )
        total = term if total is None else ops.add(total, term)
    return ops.mul(total, ops.const(np.asarray(1.0 / len(logits_real), total.data.dtype)))


def hinge_g(logits_fake) -> Tensor:
    """-mean(f), averaged over scales."""
    logits_fake = _as_list(logits_fake)
    if not logits_fake:
        raise DimensionError("empty logits list")
    total = None
    for f in logits_fake:
        term = ops.neg(_mean_all(f))
        total = term if total is None else ops.add(total, term)
    return ops.mul(total, ops.const(np.asarray(1.0 / len(logits_fake), total.data.dtype)))


def feature_matching(feats_real: list[list[Tensor]], feats_fake: list[list[Tensor]]) -> Tensor:
    """Mean |real - fake| per layer, averaged over layers and scales.

    Real activations are detached: this term teaches the generator to match
    the discriminator's statistics, not the discriminator to drift.
    """
    if len(feats_real) != len(feats_fake):
        raise DimensionError("scale count mismatch between feature lists")
    terms = []
    for fr, ff in zip(feats_real, feats_fake):
        if len(fr) != len(ff):
            raise DimensionError("layer count mismatch between feature lists")
        for r, f in zip(fr, ff):
            if r.data.shape != f.data.shape:
                raise DimensionError(
                    f"feature shape mismatch {r.data.shape} vs {f.data.shape}"
                )
            terms.append(_mean_all(ops.absolute(ops.sub(f, r.detach()))))
    if not terms:
        raise DimensionError("empty feature lists")
    total = terms[0]
    for t in terms[1:]:
        total = ops.add(total, t)
    return ops.mul(total, ops.const(np.asarray(1.0 / len(terms), total.data.dtype)))


def perceptual_loss(img_a: Tensor, img_b: Tensor, feature_net) -> Tensor:
    """Weighted L1 over the K feature stages, stage k weighted 1/2^(K-k)."""
    fa = feature_net(img_a)
    fb = feature_net(img_b)
    k_stages = len(fa)
    total = None
    for k, (a, b) in enumerate(zip(fa, fb), start=1):
        w = 1.0 / 2 ** (k_stages - k)
        term = ops.mul(
            _mean_all(ops.absolute(ops.sub(a, b))),
            ops.const(np.asarray(w, a.data.dtype)),
        )
        total = term if total is None else ops.add(total, term)
    return total


def clamp_logvar(logvar: Tensor) -> Tensor:
    return ops.clip(logvar, -LOGVAR_LIMIT, LOGVAR_LIMIT)


def kld_loss(mu: Tensor, logvar: Tensor) -> Tensor:
    """0.5 * sum(exp(logvar) + mu^2 - 1 - logvar)."""
    lv = clamp_logvar(logvar)
    one = ops.const(np.ones_like(mu.data))
    inner = ops.sub(ops.sub(ops.add(ops.exp(lv), ops.mul(mu, mu)), one), lv)
    return ops.mul(ops.tsum(inner), ops.const(np.asarray(0.5, mu.data.dtype)))


def reparameterize(mu: Tensor, logvar: Tensor, rng: SplitMix64) -> Tensor:
    """z = mu + exp(logvar/2) * eps with eps ~ N(0, I), eps off the tape."""
    lv = clamp_logvar(logvar)
    eps = ops.const(rng.normal(mu.data.shape).astype(mu.data.dtype))
    half = ops.const(np.asarray(0.5, mu.data.dtype))
    return ops.add(mu, ops.mul(ops.exp(ops.mul(lv, half)), eps))


def generator_objective(
    logits_fake,
    feats_real,
    feats_fake,
    img_real,
    img_fake,
    feature_net,
    weights: LossWeights,
    mu=None,
    logvar=None,
):
    """Weighted sum of the generator-side terms; returns (total, components)."""
    parts = {
        "gan": hinge_g(logits_fake),
        "feat": feature_matching(feats_real, feats_fake),
        "perc": perceptual_loss(img_fake, img_real, feature_net),
    }
    wmap = {"gan": weights.w_gan, "feat": weights.w_feat, "perc": weights.w_perc}
    if mu is not None:
        parts["kld"] = kld_loss(mu, logvar)
        wmap["kld"] = weights.w_kld
    total = None
    for name, term in parts.items():
        scaled = ops.mul(term, ops.const(np.asarray(wmap[name], term.data.dtype)))
        total = scaled if total is None else ops.add(total, scaled)
    return total, {k: float(v.data) for k, v in parts.items()}
