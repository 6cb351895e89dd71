import numpy as np
import pytest

from modecodec import nn

from conftest import check_gradients


def test_add_mul_grads():
    check_gradients(lambda a, b: nn.tsum(nn.mul(nn.add(a, b), a)),
                    [np.random.default_rng(1).standard_normal((2, 3, 4, 4)),
                     np.random.default_rng(2).standard_normal((2, 3, 4, 4))])


def test_broadcast_bias_grad():
    rng = np.random.default_rng(3)
    check_gradients(lambda x, b: nn.tsum(nn.square(nn.add(x, b))),
                    [rng.standard_normal((2, 5, 3, 3)), rng.standard_normal((1, 5, 1, 1))])


def test_div_sqrt_exp_log_grads():
    rng = np.random.default_rng(4)
    x = rng.uniform(0.5, 2.0, (3, 4))
    y = rng.uniform(0.5, 2.0, (3, 4))
    check_gradients(lambda a, b: nn.tsum(nn.div(nn.sqrt(a), nn.exp(nn.log(b)))), [x, y])


def test_softplus_abs_where_grads():
    rng = np.random.default_rng(5)
    x = rng.standard_normal((4, 4)) * 3
    x[np.abs(x) < 1e-3] = 0.5  # keep away from |x|=0 kink
    cond = x > 0.2
    check_gradients(
        lambda a: nn.tsum(nn.where(cond, nn.softplus(a), nn.absolute(a))), [x]
    )


def test_leaky_relu_values_and_grad():
    t = nn.Tensor(np.array([-1.0, 0.5, 2.0]))
    out = nn.leaky_relu(t, 0.01)
    assert np.allclose(out.data, [-0.01, 0.5, 2.0])
    x = np.array([-2.0, -0.3, 0.4, 1.7])  # away from 0
    check_gradients(lambda a: nn.tsum(nn.mul(nn.leaky_relu(a, 0.01), a)), [x])
    nonneg = nn.Tensor(np.array([0.0, 1.0, 3.0]))
    assert np.array_equal(nn.leaky_relu(nonneg, 0.2).data, nonneg.data)


def test_leaky_relu_slope_domain():
    with pytest.raises(ValueError):
        nn.leaky_relu(nn.Tensor(np.zeros(3)), 1.5)


def test_clip_values_grad_modes():
    t = nn.Tensor(np.array([1.7, -0.2, 0.4]), requires_grad=True)
    out = nn.clip(t, 0.0, 1.0)
    assert np.allclose(out.data, [1.0, 0.0, 0.4])
    nn.tsum(out).backward()
    assert np.allclose(t.grad, [0.0, 0.0, 1.0])

    t2 = nn.Tensor(np.array([1.7, -0.2, 0.4]), requires_grad=True)
    nn.tsum(nn.clip(t2, 0.0, 1.0, straight_through=True)).backward()
    assert np.allclose(t2.grad, [1.0, 1.0, 1.0])

    inrange = nn.Tensor(np.array([0.1, 0.9]))
    assert np.array_equal(nn.clip(inrange, 0.0, 1.0).data, inrange.data)


def test_clip_inverted_bounds():
    with pytest.raises(ValueError):
        nn.clip(nn.Tensor(np.zeros(2)), 1.0, 0.0)


def test_concat_shapes_and_grad():
    a = np.zeros((1, 3, 8, 8))
    b = np.zeros((1, 5, 8, 8))
    out = nn.concat([nn.Tensor(a), nn.Tensor(b)], axis=1)
    assert out.shape == (1, 8, 8, 8)
    rng = np.random.default_rng(6)
    check_gradients(
        lambda x, y: nn.tsum(nn.square(nn.concat([x, y], axis=1))),
        [rng.standard_normal((1, 2, 3, 3)), rng.standard_normal((1, 4, 3, 3))],
    )


def test_concat_mismatch_raises():
    with pytest.raises(nn.ShapeError):
        nn.concat([nn.Tensor(np.zeros((1, 3, 8, 8))), nn.Tensor(np.zeros((1, 5, 4, 8)))])


def test_narrow_grad():
    rng = np.random.default_rng(7)
    check_gradients(lambda x: nn.tsum(nn.square(nn.narrow(x, 1, 1, 2))),
                    [rng.standard_normal((2, 4, 3, 3))])


def test_maximum_floor_grad():
    t = nn.Tensor(np.array([0.5, 2.0]), requires_grad=True)
    nn.tsum(nn.maximum(t, 1.0)).backward()
    assert np.allclose(t.grad, [0.0, 1.0])


def test_backward_requires_scalar():
    t = nn.Tensor(np.zeros((2, 2)), requires_grad=True)
    with pytest.raises(nn.ShapeError):
        nn.add(t, t).backward()


def test_check_finite():
    with pytest.raises(nn.NumericsError):
        nn.Tensor(np.array([1.0, np.nan])).check_finite("input")


def test_forward_backward_determinism():
    rng = np.random.default_rng(8)
    x = rng.standard_normal((2, 3, 8, 8)).astype(np.float32)
    w = rng.standard_normal((4, 3, 3, 3)).astype(np.float32)

    def run():
        xt = nn.Tensor(x.copy(), requires_grad=True)
        wt = nn.Tensor(w.copy(), requires_grad=True)
        out = nn.conv2d(xt, wt, None, stride=1, padding=1)
        loss = nn.tsum(nn.square(out))
        loss.backward()
        return out.data.copy(), xt.grad.copy(), wt.grad.copy()

    o1, gx1, gw1 = run()
    o2, gx2, gw2 = run()
    assert np.array_equal(o1, o2) and np.array_equal(gx1, gx2) and np.array_equal(gw1, gw2)


def test_no_grad_suppresses_graph():
    with nn.no_grad():
        t = nn.Tensor(np.ones(3), requires_grad=True)
        out = nn.mul(t, t)
    assert not out.requires_grad
