"""Parameter containers and the basic learnable layers.

Modules register parameters, buffers, and children in insertion order so
parameter enumeration (and therefore checkpoints and optimizer state) is
deterministic.
"""

from __future__ import annotations

import math

import numpy as np

from . import ops
from .autograd import Tensor, no_grad
from .errors import ConfigError
from .rng import SplitMix64


class Parameter(Tensor):
    def __init__(self, data, name=None):
        super().__init__(data, requires_grad=True, name=name)


def glorot_init(shape, rng: SplitMix64, dtype=np.float32) -> np.ndarray:
    """Uniform on +-sqrt(6/(fan_in+fan_out))."""
    if len(shape) == 4:
        cout, cin, kh, kw = shape
        fan_in, fan_out = cin * kh * kw, cout * kh * kw
    elif len(shape) == 2:
        fan_out, fan_in = shape
    else:
        raise ConfigError(f"cannot derive fans from shape {shape}")
    bound = math.sqrt(6.0 / (fan_in + fan_out))
    return ((rng.uniform(shape) * 2.0 - 1.0) * bound).astype(dtype)


class Module:
    """Base class with ordered parameter/buffer/child registries."""

    def __init__(self):
        object.__setattr__(self, "_params", {})
        object.__setattr__(self, "_buffers", {})
        object.__setattr__(self, "_children", {})

    def __setattr__(self, key, value):
        if isinstance(value, Parameter):
            self._params[key] = value
        elif isinstance(value, Module):
            self._children[key] = value
        object.__setattr__(self, key, value)

    def register_buffer(self, key, value: np.ndarray) -> None:
        self._buffers[key] = key
        object.__setattr__(self, key, value)

    def named_parameters(self, prefix: str = ""):
        for k, p in self._params.items():
            yield prefix + k, p
        for k, child in self._children.items():
            yield from child.named_parameters(prefix + k + ".")

    def parameters(self):
        return [p for _, p in self.named_parameters()]

    def named_buffers(self, prefix: str = ""):
        for k in self._buffers:
            yield prefix + k, getattr(self, k)
        for k, child in self._children.items():
            yield from child.named_buffers(prefix + k + ".")

    def set_buffer(self, name: str, value: np.ndarray) -> None:
        parts = name.split(".")
        mod = self
        for p in parts[:-1]:
            mod = mod._children[p]
        if parts[-1] not in mod._buffers:
            raise KeyError(f"unknown buffer {name}")
        object.__setattr__(mod, parts[-1], value)

    def param_count(self) -> int:
        return sum(p.size for p in self.parameters())

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.zero_grad()

    def astype(self, dtype) -> "Module":
        """Convert parameters and floating buffers in place; returns self."""
        for p in self.parameters():
            p.data = p.data.astype(dtype)
            p.grad = None
        for m in self.modules():
            for k in m._buffers:
                v = getattr(m, k)
                if isinstance(v, np.ndarray) and np.issubdtype(v.dtype, np.floating):
                    object.__setattr__(m, k, v.astype(dtype))
            if isinstance(m, SpectralWeight):
                m._v = None
        return self

    def modules(self):
        yield self
        for child in self._children.values():
            yield from child.modules()

    def power_iterate(self) -> None:
        """One spectral-norm power iteration on every spectral weight below."""
        for m in self.modules():
            sw = getattr(m, "spectral_weight", None)
            if sw is not None:
                sw.power_iterate()


class ModuleList(Module):
    def __init__(self, items=()):
        super().__init__()
        self._items = []
        for it in items:
            self.append(it)

    def append(self, mod: Module) -> None:
        self._children[str(len(self._items))] = mod
        self._items.append(mod)

    def __iter__(self):
        return iter(self._items)

    def __getitem__(self, i):
        return self._items[i]

    def __len__(self):
        return len(self._items)


class SpectralWeight(Module):
    """Weight with a persistent largest-singular-value estimate.

    The weight is viewed as a 2-d matrix (out_channels x rest). One power
    iteration refreshes (u, v); the effective weight divides the raw weight
    by sigma = u^T W v, computed in-graph so gradients see the scaling.
    """

    SIGMA_FLOOR = 1e-8

    def __init__(self, shape, rng: SplitMix64, dtype=np.float32):
        super().__init__()
        self.raw = Parameter(glorot_init(shape, rng, dtype))
        rows = shape[0]
        u = rng.normal((rows,)).astype(dtype)
        self.register_buffer("u", u / (np.linalg.norm(u) + 1e-12))
        self._v = None

    def _matrix(self) -> np.ndarray:
        return self.raw.data.reshape(self.raw.shape[0], -1)

    def power_iterate(self, iters: int = 1) -> None:
        w = self._matrix()
        u = self.u
        for _ in range(iters):
            v = w.T @ u
            v = v / (np.linalg.norm(v) + 1e-12)
            u = w @ v
            u = u / (np.linalg.norm(u) + 1e-12)
        self.register_buffer("u", u.astype(w.dtype))
        self._v = v.astype(w.dtype)

    def effective(self) -> Tensor:
        """Raw weight divided by the current sigma estimate, in-graph."""
        if self._v is None:
            with no_grad():
                w = self._matrix()
                v = w.T @ self.u
                self._v = (v / (np.linalg.norm(v) + 1e-12)).astype(w.dtype)
        outer = np.outer(self.u, self._v).reshape(self.raw.shape)
        sigma = ops.tsum(ops.mul(self.raw, ops.const(outer)))
        if float(sigma.data) < self.SIGMA_FLOOR:
            sigma = ops.add(sigma, ops.const(
                np.asarray(self.SIGMA_FLOOR, dtype=self.raw.dtype)))
        return ops.div(self.raw, ops.reshape(sigma, (1,) * self.raw.ndim))

    def normalized(self) -> Tensor:
        """One power-iteration update, then the effective weight."""
        self.power_iterate()
        return self.effective()


class Conv2d(Module):
    def __init__(self, cin, cout, k, stride=1, padding=None, bias=True,
                 spectral=False, rng=None, dtype=np.float32):
        super().__init__()
        self.stride = stride
        self.padding = k // 2 if padding is None else padding
        self.spectral_weight = None
        if spectral:
            self.sw = SpectralWeight((cout, cin, k, k), rng, dtype)
            object.__setattr__(self, "spectral_weight", self.sw)
        else:
            self.w = Parameter(glorot_init((cout, cin, k, k), rng, dtype))
        self.b = Parameter(np.zeros(cout, dtype=dtype)) if bias else None

    def weight(self) -> Tensor:
        return self.sw.effective() if self.spectral_weight else self.w

    def __call__(self, x: Tensor) -> Tensor:
        return ops.conv2d(x, self.weight(), self.b,
                          stride=self.stride, padding=self.padding)


class Linear(Module):
    def __init__(self, din, dout, bias=True, spectral=False, rng=None,
                 dtype=np.float32):
        super().__init__()
        self.spectral_weight = None
        if spectral:
            self.sw = SpectralWeight((dout, din), rng, dtype)
            object.__setattr__(self, "spectral_weight", self.sw)
        else:
            self.w = Parameter(glorot_init((dout, din), rng, dtype))
        self.b = Parameter(np.zeros(dout, dtype=dtype)) if bias else None

    def weight(self) -> Tensor:
        return self.sw.effective() if self.spectral_weight else self.w

    def __call__(self, x: Tensor) -> Tensor:
        return ops.linear(x, self.weight(), self.b)


class ChannelAffine(Module):
    """Learned per-channel scale and shift, identity at init."""

    def __init__(self, channels, dtype=np.float32):
        super().__init__()
        self.gamma = Parameter(np.ones(channels, dtype=dtype))
        self.beta = Parameter(np.zeros(channels, dtype=dtype))

    def __call__(self, x: Tensor) -> Tensor:
        c = self.gamma.shape[0]
        g = ops.reshape(self.gamma, (1, c, 1, 1))
        b = ops.reshape(self.beta, (1, c, 1, 1))
        return ops.add(ops.mul(x, g), b)
