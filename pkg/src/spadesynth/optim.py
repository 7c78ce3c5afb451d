"""Adam with bias correction and the linear two-rate decay schedule."""

from __future__ import annotations

import numpy as np

from .errors import UsageError


class Adam:
    """Standard Adam over a named parameter list.

    With beta1=0 the update is effectively lr * g / (sqrt(v_hat) + eps):
    momentum-free, per-coordinate scaled. State is keyed by parameter name so
    it serializes alongside the weights.
    """

    def __init__(self, named_params, beta1: float = 0.0, beta2: float = 0.999,
                 eps: float = 1e-8):
        self.params = list(named_params)
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {n: np.zeros_like(p.data) for n, p in self.params}
        self.v = {n: np.zeros_like(p.data) for n, p in self.params}

    def step(self, lr: float) -> None:
        for name, p in self.params:
            if p.grad is None:
                raise UsageError(f"parameter {name} has no gradient; run backward first")
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1 ** self.t
        c2 = 1.0 - b2 ** self.t
        for name, p in self.params:
            g = p.grad
            m = self.m[name] = b1 * self.m[name] + (1 - b1) * g
            v = self.v[name] = b2 * self.v[name] + (1 - b2) * g * g
            p.data -= (lr * (m / c1) / (np.sqrt(v / c2) + self.eps)).astype(p.data.dtype)

    def state_arrays(self, prefix: str) -> dict:
        out = {f"{prefix}.t": np.array([self.t], dtype=np.uint64)}
        for name, _ in self.params:
            out[f"{prefix}.m.{name}"] = self.m[name]
            out[f"{prefix}.v.{name}"] = self.v[name]
        return out

    def load_state_arrays(self, prefix: str, arrays: dict) -> None:
        self.t = int(arrays[f"{prefix}.t"][0])
        for name, p in self.params:
            for slot, store in (("m", self.m), ("v", self.v)):
                arr = arrays[f"{prefix}.{slot}.{name}"]
                if arr.shape != p.data.shape:
                    raise UsageError(
                        f"optimizer state {slot}.{name} has shape {arr.shape}, "
                        f"parameter has {p.data.shape}"
                    )
                store[name] = arr.astype(p.data.dtype)


def lr_factor(epoch: int, total_epochs: int, decay_start: int) -> float:
    """1.0 through decay_start, then linear to exactly 0 at the last epoch.

    A single-epoch run has no decay window and trains at full rate.
    """
    if epoch >= total_epochs - 1:
        return 0.0 if total_epochs > 1 else 1.0
    if epoch <= decay_start:
        return 1.0
    return (total_epochs - 1 - epoch) / (total_epochs - 1 - decay_start)


def lr_schedule(epoch: int, config) -> tuple[float, float]:
    """(lr_g, lr_d) at the given epoch; the d/g ratio never changes."""
    f = lr_factor(epoch, config.epochs, config.decay_start_epoch)
    return config.lr_g * f, config.lr_d * f
