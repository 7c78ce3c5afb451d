import numpy as np
import pytest

from spadesynth import norms, ops
from spadesynth.autograd import Tape, Tensor, backward, grad_check, use_tape
from spadesynth.errors import ConfigError, DimensionError
from conftest import conv2d_oracle, matmul_oracle


def _seed_backward(y, g):
    backward(ops.tsum(ops.mul(y, ops.const(g))))


def test_conv_1x1_kernel_scales_input():
    x = Tensor(np.ones((1, 1, 3, 3)))
    w = Tensor(np.full((1, 1, 1, 1), 2.0))
    b = Tensor(np.zeros(1))
    y = ops.conv2d(x, w, b)
    assert np.array_equal(y.data, np.full((1, 1, 3, 3), 2.0))


def test_conv_all_ones_kernel_sums_window():
    x = Tensor(np.arange(1.0, 10.0).reshape(1, 1, 3, 3))
    w = Tensor(np.ones((1, 1, 3, 3)))
    y = ops.conv2d(x, w, Tensor(np.zeros(1)))
    assert y.data.shape == (1, 1, 1, 1)
    assert y.item() == 45.0


@pytest.mark.parametrize("stride,padding", [(1, 1), (1, 0), (2, 1), (1, 2)])
def test_conv_matches_loop_oracle(np_rng, stride, padding):
    x = np_rng.standard_normal((2, 3, 8, 8))
    w = np_rng.standard_normal((4, 3, 3, 3))
    b = np_rng.standard_normal(4)
    if (8 + 2 * padding - 3) % stride:
        pytest.skip("non-integral output")
    y = ops.conv2d(Tensor(x), Tensor(w), Tensor(b), stride=stride, padding=padding)
    assert np.allclose(y.data, conv2d_oracle(x, w, b, stride, padding), atol=1e-12)


def test_conv_gradients_match_loop_oracle(np_rng):
    x = np_rng.standard_normal((2, 3, 6, 6))
    w = np_rng.standard_normal((4, 3, 3, 3))
    g = np_rng.standard_normal((2, 4, 6, 6))
    xt = Tensor(x, requires_grad=True)
    wt = Tensor(w, requires_grad=True)
    with use_tape(Tape()):
        _seed_backward(ops.conv2d(xt, wt, padding=1), g)
    # dW[o,c,ky,kx] = sum_n,y,x g[n,o,y,x] * xp[n,c,y+ky,x+kx]
    xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    gw = np.zeros_like(w)
    for ky in range(3):
        for kx in range(3):
            gw[:, :, ky, kx] = np.einsum(
                "noyx,ncyx->oc", g, xp[:, :, ky:ky + 6, kx:kx + 6]
            )
    assert np.allclose(wt.grad, gw, atol=1e-10)
    # dX by full correlation with the flipped kernel
    gx = conv2d_oracle(g, w[:, :, ::-1, ::-1].transpose(1, 0, 2, 3), padding=1)
    assert np.allclose(xt.grad, gx, atol=1e-10)


def test_conv_pointwise_matches_general_path(np_rng):
    x = np_rng.standard_normal((2, 6, 5, 5))
    w1 = np_rng.standard_normal((4, 6, 1, 1))
    y = ops.conv2d(Tensor(x), Tensor(w1))
    assert np.allclose(y.data, conv2d_oracle(x, w1), atol=1e-12)


def test_conv_linear_in_input(np_rng):
    w = Tensor(np_rng.standard_normal((4, 3, 3, 3)))
    x1 = np_rng.standard_normal((1, 3, 6, 6))
    x2 = np_rng.standard_normal((1, 3, 6, 6))
    a, b = 1.7, -0.4
    lhs = ops.conv2d(Tensor(a * x1 + b * x2), w, padding=1).data
    rhs = (
        a * ops.conv2d(Tensor(x1), w, padding=1).data
        + b * ops.conv2d(Tensor(x2), w, padding=1).data
    )
    assert np.allclose(lhs, rhs, atol=1e-10)


def test_conv_shape_errors():
    with pytest.raises(DimensionError):
        ops.conv2d(Tensor(np.ones((1, 2, 4, 4))), Tensor(np.ones((1, 3, 3, 3))))
    with pytest.raises(ConfigError):
        # (4 - 3) not divisible by stride 2
        ops.conv2d(Tensor(np.ones((1, 1, 4, 4))), Tensor(np.ones((1, 1, 3, 3))),
                   stride=2)
    with pytest.raises(ConfigError):
        ops.conv2d(Tensor(np.ones((1, 1, 4, 4))), Tensor(np.ones((1, 1, 2, 2))))


def test_linear_identity_and_example():
    x = Tensor(np.array([[2.0, 3.0]]))
    eye = ops.linear(x, Tensor(np.eye(2)), Tensor(np.zeros(2)))
    assert np.array_equal(eye.data, x.data)
    y = ops.linear(x, Tensor(np.array([[1.0, 1.0]])), Tensor(np.array([1.0])))
    assert y.data.tolist() == [[6.0]]


def test_linear_matches_matmul_oracle(np_rng):
    x = np_rng.standard_normal((5, 7))
    w = np_rng.standard_normal((4, 7))
    y = ops.linear(Tensor(x), Tensor(w))
    assert np.allclose(y.data, matmul_oracle(x, w.T), atol=1e-12)


def test_upsample_block_replication():
    one = ops.nearest_upsample(Tensor(np.full((1, 1, 1, 1), 5.0)), 2)
    assert np.array_equal(one.data, np.full((1, 1, 2, 2), 5.0))
    x = Tensor(np.array([[1.0, 2.0], [3.0, 4.0]]).reshape(1, 1, 2, 2))
    y = ops.nearest_upsample(x, 2)
    want = np.array([
        [1, 1, 2, 2], [1, 1, 2, 2], [3, 3, 4, 4], [3, 3, 4, 4],
    ], dtype=np.float64).reshape(1, 1, 4, 4)
    assert np.array_equal(y.data, want)


def test_upsample_factor_one_is_identity(np_rng):
    x = np_rng.standard_normal((2, 3, 4, 4))
    assert np.array_equal(ops.nearest_upsample(Tensor(x), 1).data, x)
    with pytest.raises(ConfigError):
        ops.nearest_upsample(Tensor(x), 0)


def test_upsample_composes_multiplicatively(np_rng):
    x = Tensor(np_rng.standard_normal((1, 2, 3, 3)))
    once = ops.nearest_upsample(x, 6).data
    twice = ops.nearest_upsample(ops.nearest_upsample(x, 2), 3).data
    assert np.array_equal(once, twice)


def test_avg_pool_halves_and_averages(np_rng):
    x = np_rng.standard_normal((2, 3, 6, 6))
    y = ops.avg_pool2(Tensor(x))
    assert y.data.shape == (2, 3, 3, 3)
    assert np.allclose(y.data[0, 0, 0, 0], x[0, 0, :2, :2].mean(), atol=1e-7)
    with pytest.raises(DimensionError):
        ops.avg_pool2(Tensor(np_rng.standard_normal((1, 1, 5, 4))))


def test_leaky_relu_values_and_gradient():
    y = ops.leaky_relu(Tensor(np.array([-1.0, 0.0, 2.0])), 0.2)
    assert np.allclose(y.data, [-0.2, 0.0, 2.0], atol=1e-12)
    y0 = ops.leaky_relu(Tensor(np.array([-3.0, 3.0])), 0.0)
    assert np.array_equal(y0.data, [0.0, 3.0])
    w = Tensor(np.array([-1.0]), requires_grad=True)
    rep = grad_check(lambda t: ops.tsum(ops.leaky_relu(t, 0.2)), w)
    assert rep["pass"] and abs(w.data[0] + 1.0) < 1e-12


_G = np.random.default_rng(1).standard_normal((2, 3, 4, 4))


@pytest.mark.parametrize("name,f", [
    ("tanh", lambda t: ops.tmean(ops.tanh(t))),
    ("exp", lambda t: ops.tmean(ops.exp(t))),
    ("abs_shifted", lambda t: ops.tmean(ops.absolute(ops.add(t, ops.const(0.3))))),
    ("mul_div", lambda t: ops.tmean(ops.div(ops.mul(t, t), ops.const(np.array(2.0))))),
    ("sqrt_sq", lambda t: ops.tmean(ops.sqrt(ops.add(ops.mul(t, t), ops.const(np.array(1.0)))))),
    ("mean_ax", lambda t: ops.tsum(ops.tmean(t, axes=(0, 2), keepdims=True))),
    ("normalize", lambda t: ops.tmean(ops.mul(ops.normalize(t, (0, 2, 3), 1e-5), ops.const(_G)))),
], ids=lambda v: v if isinstance(v, str) else "")
def test_elementwise_grads_match_finite_differences(np_rng, name, f):
    shape = (2, 3, 4, 4)
    w = Tensor(np_rng.standard_normal(shape), requires_grad=True)
    rep = grad_check(f, w)
    assert rep["pass"], (name, rep)


def test_fused_normalize_equals_reference_forward_and_backward(np_rng):
    for kind in ("batch", "instance", "positional"):
        x = np_rng.standard_normal((3, 5, 4, 4))
        g = np_rng.standard_normal(x.shape)
        ha = Tensor(x.copy(), requires_grad=True)
        hb = Tensor(x.copy(), requires_grad=True)
        with use_tape(Tape()):
            ya = norms.normalize(ha, kind)
            yb = norms.normalize_reference(hb, kind)
            assert np.allclose(ya.data, yb.data, atol=1e-12)
            _seed_backward(ya, g)
            _seed_backward(yb, g)
        assert np.allclose(ha.grad, hb.grad, atol=1e-10), kind


def test_concat_channels_splits_gradient(np_rng):
    a = Tensor(np_rng.standard_normal((1, 2, 3, 3)), requires_grad=True)
    b = Tensor(np_rng.standard_normal((1, 4, 3, 3)), requires_grad=True)
    g = np_rng.standard_normal((1, 6, 3, 3))
    with use_tape(Tape()):
        y = ops.concat_channels([a, b])
        assert y.data.shape == (1, 6, 3, 3)
        _seed_backward(y, g)
    assert np.allclose(a.grad, g[:, :2], atol=1e-12)
    assert np.allclose(b.grad, g[:, 2:], atol=1e-12)


def test_broadcast_gradients_reduce_correctly(np_rng):
    a = Tensor(np_rng.standard_normal((2, 3, 4, 4)), requires_grad=True)
    b = Tensor(np_rng.standard_normal((1, 3, 1, 1)), requires_grad=True)
    rep = grad_check(lambda t: ops.tsum(ops.mul(a.detach(), t)), b)
    assert rep["pass"]
    rep = grad_check(lambda t: ops.tsum(ops.add(t, b.detach())), a)
    assert rep["pass"]
