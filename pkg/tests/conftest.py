"""Shared oracles and fixtures.

The oracles here are deliberately naive (nested loops, direct formulas) so
library results are checked against code with no shared machinery.
"""

import numpy as np
import pytest

from spadesynth.rng import SplitMix64


def conv2d_oracle(x, w, b=None, stride=1, padding=0):
    """Six-nested-loop cross-correlation, float64."""
    x = np.asarray(x, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    n, cin, h, wid = x.shape
    cout, _, k, _ = w.shape
    xp = np.zeros((n, cin, h + 2 * padding, wid + 2 * padding))
    xp[:, :, padding:padding + h, padding:padding + wid] = x
    ho = (h + 2 * padding - k) // stride + 1
    wo = (wid + 2 * padding - k) // stride + 1
    out = np.zeros((n, cout, ho, wo))
    for ni in range(n):
        for co in range(cout):
            for yo in range(ho):
                for xo in range(wo):
                    acc = 0.0
                    for ci in range(cin):
                        for ky in range(k):
                            for kx in range(k):
                                acc += (
                                    xp[ni, ci, yo * stride + ky, xo * stride + kx]
                                    * w[co, ci, ky, kx]
                                )
                    out[ni, co, yo, xo] = acc
    if b is not None:
        out += np.asarray(b, dtype=np.float64).reshape(1, cout, 1, 1)
    return out


def matmul_oracle(a, b):
    """Triple-loop matrix product, float64."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    n, k = a.shape
    k2, m = b.shape
    assert k == k2
    out = np.zeros((n, m))
    for i in range(n):
        for j in range(m):
            for p in range(k):
                out[i, j] += a[i, p] * b[p, j]
    return out


@pytest.fixture
def rng():
    return SplitMix64(0xC0FFEE)


@pytest.fixture
def np_rng():
    return np.random.default_rng(0xC0FFEE)
