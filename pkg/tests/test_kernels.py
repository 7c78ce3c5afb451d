"""Backend parity: both kernel implementations must agree bit for bit."""

import numpy as np
import pytest

from spadesynth import kernels


def _both():
    b = kernels.backends()
    if "native" not in b:
        pytest.skip("compiled extension not built")
    return b["python"], b["native"]


@pytest.mark.parametrize("dtype", [np.float32, np.float64])
@pytest.mark.parametrize("k,stride", [(1, 1), (3, 1), (3, 2), (5, 1), (5, 2)])
def test_im2col_and_scatter_bit_identical(np_rng, dtype, k, stride):
    py, nat = _both()
    xp = np.ascontiguousarray(
        np_rng.standard_normal((2, 3, 11, 11)).astype(dtype)
    )
    ho = (11 - k) // stride + 1
    wo = (11 - k) // stride + 1
    c1 = py.im2col(xp, k, stride, ho, wo)
    c2 = nat.im2col(xp, k, stride, ho, wo)
    assert c1.dtype == c2.dtype == dtype
    assert np.array_equal(c1, c2)

    g = np.ascontiguousarray(np_rng.standard_normal(c1.shape).astype(dtype))
    g1 = np.zeros_like(xp)
    g2 = np.zeros_like(xp)
    py.col2im_add(g, k, stride, g1)
    nat.col2im_add(g, k, stride, g2)
    assert np.array_equal(g1, g2)


@pytest.mark.parametrize("dtype", [np.float32, np.float64])
@pytest.mark.parametrize("f", [2, 3, 4])
def test_upsample_round_trip_bit_identical(np_rng, dtype, f):
    py, nat = _both()
    x = np.ascontiguousarray(np_rng.standard_normal((2, 4, 6, 6)).astype(dtype))
    u1, u2 = py.upsample_nearest(x, f), nat.upsample_nearest(x, f)
    assert np.array_equal(u1, u2)
    g = np.ascontiguousarray(np_rng.standard_normal(u1.shape).astype(dtype))
    d1, d2 = py.upsample_nearest_back(g, f), nat.upsample_nearest_back(g, f)
    assert np.array_equal(d1, d2)


def test_backend_selection_reports_an_available_backend():
    assert kernels.BACKEND in kernels.backends()
    assert "python" in kernels.backends()


def test_im2col_gathers_expected_patch(np_rng):
    py = kernels.backends()["python"]
    xp = np.arange(25.0).reshape(1, 1, 5, 5)
    cols = py.im2col(np.ascontiguousarray(xp), 3, 1, 3, 3)
    # patch at output (0,0) is the top-left 3x3 window
    assert np.array_equal(cols[0, 0, :, :, 0, 0], xp[0, 0, :3, :3])
    # patch at output (2,2) is the bottom-right window
    assert np.array_equal(cols[0, 0, :, :, 2, 2], xp[0, 0, 2:, 2:])
