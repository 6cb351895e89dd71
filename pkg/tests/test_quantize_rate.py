import numpy as np
import pytest

from modecodec import nn
from modecodec.entropy import (
    LatentRangeError,
    RateStats,
    laplace_bin_mass,
    quantize_infer,
    quantize_train,
    rate_estimate,
    round_half_away,
)


def test_round_half_away_cases():
    vals = np.array([1.4, -1.5, 0.5, -0.5, 2.5, 0.0, -1.4])
    assert np.array_equal(round_half_away(vals), [1, -2, 1, -1, 3, 0, -1])


def test_quantize_train_bounds_and_identity_grad():
    rng = np.random.default_rng(0)
    y = nn.Tensor(np.zeros((1, 2, 8, 8), dtype=np.float32), requires_grad=True)
    yt = quantize_train(y, rng)
    assert np.all(np.abs(yt.data) < 0.5)
    nn.tsum(yt).backward()
    assert np.array_equal(y.grad, np.ones_like(y.data))


def test_quantize_train_monte_carlo_mean():
    rng = np.random.default_rng(1)
    y = nn.Tensor(np.full(10 ** 5, 1.0, dtype=np.float64))
    yt = quantize_train(y, rng)
    assert abs(yt.data.mean() - 1.0) < 0.005


def test_quantize_infer_rounding_and_idempotence():
    y = nn.Tensor(np.array([1.4, -1.5, 0.5, 0.0]))
    q = quantize_infer(y)
    assert np.array_equal(q, [1, -2, 1, 0])
    assert np.array_equal(quantize_infer(q.astype(np.float64)), q)
    assert np.array_equal(quantize_infer(np.zeros(5)), np.zeros(5, dtype=np.int64))


def test_quantize_infer_range_error():
    with pytest.raises(LatentRangeError):
        quantize_infer(np.array([300.0]))


def test_rate_single_element_closed_form():
    # frozen from a 40-digit evaluation of -log2(1 - e^{-1/2})
    yq = nn.Tensor(np.array([0.0]))
    mu = nn.Tensor(np.array([0.0]))
    b = nn.Tensor(np.array([1.0]))
    bits = rate_estimate(yq, mu, b).item()
    assert abs(bits - 1.3456768717052028) < 1e-12


def test_rate_at_mode_small_and_locally_minimal():
    mu = nn.Tensor(np.array([0.0]))
    b = nn.Tensor(np.array([0.011]))
    at_mode = rate_estimate(nn.Tensor(np.array([0.0])), mu, b).item()
    off_mode = rate_estimate(nn.Tensor(np.array([1.0])), mu, b).item()
    assert at_mode < 1e-6
    assert off_mode > at_mode


def test_rate_increases_with_scale_at_mode():
    # frozen oracle: doubling b at yq=mu raises the bits from 1.3457 to 2.1766
    yq = nn.Tensor(np.array([0.0]))
    mu = nn.Tensor(np.array([0.0]))
    b1 = rate_estimate(yq, mu, nn.Tensor(np.array([1.0]))).item()
    b2 = rate_estimate(yq, mu, nn.Tensor(np.array([2.0]))).item()
    assert abs(b2 - 2.1765818166168769) < 1e-12
    assert b2 > b1
    # and monotone along a sweep
    prev = 0.0
    for b in (0.05, 0.1, 0.5, 1.0, 4.0, 16.0):
        bits = rate_estimate(yq, mu, nn.Tensor(np.array([b]))).item()
        assert bits > prev
        prev = bits


def test_rate_underflow_floored_and_counted():
    stats = RateStats()
    yq = nn.Tensor(np.array([250.0, 0.0]))
    mu = nn.Tensor(np.array([0.0, 0.0]))
    b = nn.Tensor(np.array([0.011, 1.0]))
    bits = rate_estimate(yq, mu, b, stats=stats)
    assert np.isfinite(bits.item())
    assert stats.underflows == 1 and stats.evaluations == 2
    assert bits.item() <= 16.0 + 1.3457  # floored element costs exactly 16 bits


def test_rate_gradcheck():
    from conftest import check_gradients

    rng = np.random.default_rng(2)
    yq = rng.uniform(-2, 2, (1, 2, 4, 4))
    mu = rng.uniform(-1, 1, (1, 2, 4, 4))
    b = rng.uniform(0.3, 3.0, (1, 2, 4, 4))
    # keep |yq-mu| away from the 0.5 branch seam where d/da is discontinuous
    gap = np.abs(np.abs(yq - mu) - 0.5)
    yq[gap < 0.05] += 0.12
    check_gradients(
        lambda y, m, s: rate_estimate(y, m, s), [yq, mu, b], subsample=40
    )


def test_bin_mass_sums_to_one():
    mu = nn.Tensor(np.zeros(1))
    b = nn.Tensor(np.array([0.7]))
    total = sum(
        laplace_bin_mass(nn.Tensor(np.array([float(t)])), mu, b).item()
        for t in range(-30, 31)
    )
    assert abs(total - 1.0) < 1e-12
