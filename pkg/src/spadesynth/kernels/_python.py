"""Pure numpy kernels; fallback when the native extension is unavailable.

Accumulation orders are pinned so the native backend can reproduce every
result bit-for-bit: col2im applies its k*k strided adds in (ky, kx) order
and the upsample backward sums blocks in (dy, dx) order.
"""

import numpy as np

BACKEND = "python"


def im2col(xp, k, stride, ho, wo):
    """Gather k*k patches from padded input xp into (N,C,k,k,ho,wo)."""
    n, c = xp.shape[:2]
    cols = np.empty((n, c, k, k, ho, wo), dtype=xp.dtype)
    for ky in range(k):
        for kx in range(k):
            cols[:, :, ky, kx] = xp[
                :, :, ky : ky + ho * stride : stride, kx : kx + wo * stride : stride
            ]
    return cols


def col2im_add(gcols, k, stride, gxp):
    """Scatter-add patch gradients (N,C,k,k,ho,wo) back into padded gxp."""
    ho, wo = gcols.shape[4], gcols.shape[5]
    for ky in range(k):
        for kx in range(k):
            gxp[
                :, :, ky : ky + ho * stride : stride, kx : kx + wo * stride : stride
            ] += gcols[:, :, ky, kx]


def upsample_nearest(x, f):
    """Replicate each pixel into an f*f block."""
    return np.repeat(np.repeat(x, f, axis=2), f, axis=3)


def upsample_nearest_back(g, f):
    """Sum each f*f block of the output gradient, in (dy, dx) order."""
    out = g[:, :, 0::f, 0::f].copy()
    for dy in range(f):
        for dx in range(f):
            if dy == 0 and dx == 0:
                continue
            out += g[:, :, dy::f, dx::f]
    return out
