"""Differentiable operations: the minimal set the networks are built from.

Each op computes its forward value eagerly and, when recording is active
and an input requires grad, registers a closure that scatters the output
gradient back to its inputs.
"""

from __future__ import annotations

import numpy as np

from . import kernels
from .autograd import Tensor, record, recording
from .errors import ConfigError, DimensionError


def const(value, dtype=None) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(np.asarray(value, dtype=dtype))


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    """Reduce a broadcast gradient back to `shape`."""
    if g.shape == tuple(shape):
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


def _binary(op, a, b, out_data, da, db) -> Tensor:
    track = recording() and (a.requires_grad or b.requires_grad)
    out = Tensor(out_data, requires_grad=track)
    if track:
        def backfn(g):
            if a.requires_grad:
                a.accumulate_grad(_unbroadcast(da(g), a.data.shape))
            if b.requires_grad:
                b.accumulate_grad(_unbroadcast(db(g), b.data.shape))
        record(op, out, (a, b), backfn)
    return out


def add(a, b) -> Tensor:
    a, b = const(a), const(b)
    return _binary("add", a, b, a.data + b.data, lambda g: g, lambda g: g)


def sub(a, b) -> Tensor:
    a, b = const(a), const(b)
    return _binary("sub", a, b, a.data - b.data, lambda g: g, lambda g: -g)


def mul(a, b) -> Tensor:
    a, b = const(a), const(b)
    return _binary("mul", a, b, a.data * b.data,
                   lambda g: g * b.data, lambda g: g * a.data)


def div(a, b) -> Tensor:
    a, b = const(a), const(b)
    out_data = a.data / b.data
    return _binary("div", a, b, out_data,
                   lambda g: g / b.data,
                   lambda g: -g * out_data / b.data)


def _unary(op, x: Tensor, out_data, dx) -> Tensor:
    track = recording() and x.requires_grad
    out = Tensor(out_data, requires_grad=track)
    if track:
        def backfn(g):
            x.accumulate_grad(dx(g))
        record(op, out, (x,), backfn)
    return out


def neg(x: Tensor) -> Tensor:
    return _unary("neg", x, -x.data, lambda g: -g)


def relu(x: Tensor) -> Tensor:
    return _unary("relu", x, np.maximum(x.data, 0),
                  lambda g: g * (x.data > 0))


def leaky_relu(x: Tensor, slope: float = 0.2) -> Tensor:
    mask = x.data >= 0
    out_data = np.where(mask, x.data, x.data * slope)
    return _unary("leaky_relu", x, out_data.astype(x.data.dtype),
                  lambda g: g * np.where(mask, 1.0, slope).astype(x.data.dtype))


def tanh(x: Tensor) -> Tensor:
    y = np.tanh(x.data)
    return _unary("tanh", x, y, lambda g: g * (1.0 - y * y))


def exp(x: Tensor) -> Tensor:
    y = np.exp(x.data)
    return _unary("exp", x, y, lambda g: g * y)


def sqrt(x: Tensor) -> Tensor:
    y = np.sqrt(x.data)
    return _unary("sqrt", x, y, lambda g: g * (0.5 / y))


def absolute(x: Tensor) -> Tensor:
    return _unary("abs", x, np.abs(x.data), lambda g: g * np.sign(x.data))


def clip(x: Tensor, lo: float, hi: float) -> Tensor:
    mask = (x.data >= lo) & (x.data <= hi)
    return _unary("clip", x, np.clip(x.data, lo, hi), lambda g: g * mask)


def reshape(x: Tensor, shape) -> Tensor:
    old = x.data.shape
    return _unary("reshape", x, x.data.reshape(shape),
                  lambda g: g.reshape(old))


def tsum(x: Tensor, axes=None, keepdims: bool = False) -> Tensor:
    out_data = x.data.sum(axis=axes, keepdims=keepdims)

    def dx(g):
        if axes is None:
            return np.broadcast_to(g, x.data.shape).astype(x.data.dtype)
        gk = g if keepdims else np.expand_dims(g, axes)
        return np.broadcast_to(gk, x.data.shape).astype(x.data.dtype)

    return _unary("sum", x, out_data, dx)


def tmean(x: Tensor, axes=None, keepdims: bool = False) -> Tensor:
    if axes is None:
        count = x.data.size
    else:
        ax = (axes,) if isinstance(axes, int) else axes
        count = int(np.prod([x.data.shape[i] for i in ax]))
    out_data = x.data.mean(axis=axes, keepdims=keepdims)
    inv = 1.0 / count

    def dx(g):
        if axes is None:
            return np.broadcast_to(g * inv, x.data.shape).astype(x.data.dtype)
        gk = g if keepdims else np.expand_dims(g, axes)
        return np.broadcast_to(gk * inv, x.data.shape).astype(x.data.dtype)

    return _unary("mean", x, out_data, dx)


def normalize(x: Tensor, axes, eps: float) -> Tensor:
    """(x - mu) / sqrt(var + eps) with both moments taken over `axes`.

    Fused into one node: for y = (x - mu) / sigma the input gradient is
    (g - mean(g) - y * mean(g * y)) / sigma with means over the same axes,
    which the op applies directly instead of taping the six-op chain.
    """
    d = x.data
    mu = d.mean(axis=axes, keepdims=True)
    centered = d - mu
    var = np.mean(centered * centered, axis=axes, keepdims=True)
    sigma = np.sqrt(var + eps)
    y = centered / sigma

    def dx(g):
        gm = g.mean(axis=axes, keepdims=True)
        gy = np.mean(g * y, axis=axes, keepdims=True)
        return ((g - gm - y * gy) / sigma).astype(d.dtype, copy=False)

    return _unary("normalize", x, y, dx)


def concat_channels(parts) -> Tensor:
    parts = [const(p) for p in parts]
    out_data = np.concatenate([p.data for p in parts], axis=1)
    track = recording() and any(p.requires_grad for p in parts)
    out = Tensor(out_data, requires_grad=track)
    if track:
        splits = np.cumsum([p.data.shape[1] for p in parts])[:-1]

        def backfn(g):
            for p, gp in zip(parts, np.split(g, splits, axis=1)):
                if p.requires_grad:
                    p.accumulate_grad(gp)
        record("concat", out, tuple(parts), backfn)
    return out


def conv2d(x: Tensor, w: Tensor, b: Tensor | None = None,
           stride: int = 1, padding: int = 0) -> Tensor:
    """Cross-correlation of NCHW input with (Cout,Cin,k,k) weight."""
    if x.ndim != 4 or w.ndim != 4:
        raise DimensionError(
            f"conv2d expects 4-d input and weight, got {x.shape} and {w.shape}"
        )
    n, cin, h, wid = x.shape
    cout, cin_w, k, k2 = w.shape
    if k != k2 or k % 2 == 0:
        raise ConfigError(f"kernel must be square with odd size, got {k}x{k2}")
    if cin != cin_w:
        raise DimensionError(
            f"conv2d channel mismatch: input {x.shape} vs weight {w.shape}"
        )
    if b is not None and b.data.shape != (cout,):
        raise DimensionError(
            f"bias shape {b.data.shape} does not match {cout} output channels"
        )
    if stride < 1 or padding < 0:
        raise ConfigError(f"invalid stride={stride} padding={padding}")
    if (h + 2 * padding - k) % stride or (wid + 2 * padding - k) % stride:
        raise ConfigError(
            f"output size not integral for input {h}x{wid}, "
            f"kernel {k}, stride {stride}, padding {padding}"
        )
    ho = (h + 2 * padding - k) // stride + 1
    wo = (wid + 2 * padding - k) // stride + 1
    if ho <= 0 or wo <= 0:
        raise ConfigError(f"empty output {ho}x{wo} for input {h}x{wid}")

    if padding:
        xp = np.zeros((n, cin, h + 2 * padding, wid + 2 * padding), dtype=x.dtype)
        xp[:, :, padding:padding + h, padding:padding + wid] = x.data
    else:
        xp = np.ascontiguousarray(x.data)
    ckk = cin * k * k
    pointwise = k == 1 and stride == 1  # patch gather is a plain reshape
    if pointwise:
        cols = xp.reshape(n, ckk, ho * wo)
    else:
        cols = kernels.im2col(xp, k, stride, ho, wo).reshape(n, ckk, ho * wo)
    wf = w.data.reshape(cout, ckk)
    out_data = np.matmul(wf, cols).reshape(n, cout, ho, wo)
    if b is not None:
        out_data += b.data.reshape(1, cout, 1, 1)

    inputs = (x, w) if b is None else (x, w, b)
    track = recording() and any(t.requires_grad for t in inputs)
    out = Tensor(out_data, requires_grad=track)
    if track:
        def backfn(g):
            gf = g.reshape(n, cout, ho * wo)
            if w.requires_grad:
                gw = np.matmul(gf, cols.transpose(0, 2, 1)).sum(axis=0)
                w.accumulate_grad(gw.reshape(w.data.shape))
            if b is not None and b.requires_grad:
                b.accumulate_grad(g.sum(axis=(0, 2, 3)))
            if x.requires_grad:
                if pointwise:
                    gxp = np.matmul(wf.T, gf).reshape(xp.shape)
                else:
                    gcols = np.matmul(wf.T, gf).reshape(n, cin, k, k, ho, wo)
                    gxp = np.zeros_like(xp)
                    kernels.col2im_add(np.ascontiguousarray(gcols), k, stride, gxp)
                if padding:
                    x.accumulate_grad(
                        gxp[:, :, padding:padding + h, padding:padding + wid]
                    )
                else:
                    x.accumulate_grad(gxp)
        record("conv2d", out, inputs, backfn)
    return out


def linear(x: Tensor, w: Tensor, b: Tensor | None = None) -> Tensor:
    """Affine map of (N,D) rows by (Dout,D) weight."""
    if x.ndim != 2 or w.ndim != 2 or x.shape[1] != w.shape[1]:
        raise DimensionError(
            f"linear shapes incompatible: input {x.shape}, weight {w.shape}"
        )
    if b is not None and b.data.shape != (w.shape[0],):
        raise DimensionError(
            f"bias shape {b.data.shape} does not match {w.shape[0]} outputs"
        )
    out_data = x.data @ w.data.T
    if b is not None:
        out_data += b.data
    inputs = (x, w) if b is None else (x, w, b)
    track = recording() and any(t.requires_grad for t in inputs)
    out = Tensor(out_data, requires_grad=track)
    if track:
        def backfn(g):
            if x.requires_grad:
                x.accumulate_grad(g @ w.data)
            if w.requires_grad:
                w.accumulate_grad(g.T @ x.data)
            if b is not None and b.requires_grad:
                b.accumulate_grad(g.sum(axis=0))
        record("linear", out, inputs, backfn)
    return out


def nearest_upsample(x: Tensor, factor: int) -> Tensor:
    """Replicate each pixel into a factor*factor block."""
    if factor < 1:
        raise ConfigError(f"upsample factor must be >= 1, got {factor}")
    if factor == 1:
        return _unary("upsample", x, x.data.copy(), lambda g: g)
    xc = np.ascontiguousarray(x.data)
    out_data = kernels.upsample_nearest(xc, factor)
    return _unary(
        "upsample", x, out_data,
        lambda g: kernels.upsample_nearest_back(np.ascontiguousarray(g), factor),
    )


def avg_pool2(x: Tensor) -> Tensor:
    """2x2 mean pooling, stride 2."""
    n, c, h, w = x.shape
    if h % 2 or w % 2:
        raise DimensionError(f"avg_pool2 needs even spatial dims, got {h}x{w}")
    out_data = x.data.reshape(n, c, h // 2, 2, w // 2, 2).mean(axis=(3, 5))

    def dx(g):
        quarter = np.ascontiguousarray((g * 0.25).astype(x.data.dtype))
        return kernels.upsample_nearest(quarter, 2)

    return _unary("avg_pool2", x, out_data.astype(x.data.dtype), dx)
