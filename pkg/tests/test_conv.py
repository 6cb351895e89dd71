import numpy as np
import pytest

from modecodec import nn

from conftest import check_gradients


def test_conv_output_shape():
    rng = np.random.default_rng(0)
    conv = nn.Conv2d(3, 8, kernel=5, stride=2, padding=2, rng=rng)
    out = conv(nn.Tensor(np.zeros((1, 3, 64, 64), dtype=np.float32)))
    assert out.shape == (1, 8, 32, 32)


def test_tconv_output_shape():
    rng = np.random.default_rng(0)
    tconv = nn.ConvTranspose2d(8, 4, kernel=5, stride=2, padding=2, output_padding=1, rng=rng)
    out = tconv(nn.Tensor(np.zeros((1, 8, 32, 32), dtype=np.float32)))
    assert out.shape == (1, 4, 64, 64)


def test_conv_1x1_identity():
    x = np.random.default_rng(1).standard_normal((1, 1, 6, 6)).astype(np.float32)
    w = nn.Tensor(np.ones((1, 1, 1, 1), dtype=np.float32))
    out = nn.conv2d(nn.Tensor(x), w, None, stride=1, padding=0)
    assert np.array_equal(out.data, x)


def test_conv_channel_mismatch_names_dims():
    rng = np.random.default_rng(2)
    conv = nn.Conv2d(3, 8, kernel=3, rng=rng)
    with pytest.raises(nn.ShapeError, match="4 channels.*expects"):
        conv(nn.Tensor(np.zeros((1, 4, 8, 8), dtype=np.float32)))


def test_conv_empty_output_raises():
    rng = np.random.default_rng(3)
    conv = nn.Conv2d(1, 1, kernel=5, stride=1, padding=0, rng=rng)
    with pytest.raises(nn.ShapeError):
        conv(nn.Tensor(np.zeros((1, 1, 3, 3), dtype=np.float32)))


def test_conv_matches_direct_computation():
    # independent oracle: explicit loop cross-correlation
    rng = np.random.default_rng(4)
    x = rng.standard_normal((2, 3, 7, 9))
    w = rng.standard_normal((4, 3, 3, 3))
    b = rng.standard_normal(4)
    stride, pad = 2, 1
    out = nn.conv2d(nn.Tensor(x), nn.Tensor(w), nn.Tensor(b), stride, pad).data

    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    ho = (7 + 2 * pad - 3) // stride + 1
    wo = (9 + 2 * pad - 3) // stride + 1
    ref = np.zeros((2, 4, ho, wo))
    for n in range(2):
        for o in range(4):
            for i in range(ho):
                for j in range(wo):
                    patch = xp[n, :, i * stride : i * stride + 3, j * stride : j * stride + 3]
                    ref[n, o, i, j] = (patch * w[o]).sum() + b[o]
    assert np.allclose(out, ref, atol=1e-12)


def test_tconv_is_adjoint_of_conv():
    # <conv(x), y> == <x, tconv(y)>: the conv weight (cout,cin,k,k) reads
    # directly as a tconv weight (cin_t=cout, cout_t=cin, k, k)
    rng = np.random.default_rng(5)
    x = rng.standard_normal((1, 3, 8, 8))
    w = rng.standard_normal((4, 3, 5, 5))
    y = rng.standard_normal((1, 4, 4, 4))
    cx = nn.conv2d(nn.Tensor(x), nn.Tensor(w), None, stride=2, padding=2).data
    ty = nn.conv_transpose2d(nn.Tensor(y), nn.Tensor(w), None,
                             stride=2, padding=2, output_padding=1)
    assert ty.shape == (1, 3, 8, 8)
    assert np.isclose((cx * y).sum(), (x * ty.data).sum(), rtol=1e-10)


@pytest.mark.parametrize("stride,pad", [(1, 1), (2, 2)])
def test_conv_gradcheck(stride, pad):
    rng = np.random.default_rng(6)
    x = rng.standard_normal((2, 3, 6, 6))
    w = rng.standard_normal((4, 3, 3, 3))
    b = rng.standard_normal(4)
    check_gradients(
        lambda xt, wt, bt: nn.tsum(nn.square(nn.conv2d(xt, wt, bt, stride, pad))),
        [x, w, b], subsample=60,
    )


@pytest.mark.parametrize("stride,pad,op", [(2, 2, 1), (1, 1, 0)])
def test_tconv_gradcheck(stride, pad, op):
    rng = np.random.default_rng(7)
    x = rng.standard_normal((2, 4, 5, 5))
    w = rng.standard_normal((4, 3, 3, 3))
    b = rng.standard_normal(3)
    check_gradients(
        lambda xt, wt, bt: nn.tsum(
            nn.square(nn.conv_transpose2d(xt, wt, bt, stride, pad, op))
        ),
        [x, w, b], subsample=60,
    )


def test_avg_pool_and_grad():
    x = np.arange(16, dtype=np.float64).reshape(1, 1, 4, 4)
    out = nn.avg_pool2(nn.Tensor(x))
    assert np.allclose(out.data, [[[[2.5, 4.5], [10.5, 12.5]]]])
    check_gradients(lambda t: nn.tsum(nn.square(nn.avg_pool2(t))), [x])
    with pytest.raises(nn.ShapeError):
        nn.avg_pool2(nn.Tensor(np.zeros((1, 1, 3, 4))))


def test_encoder_decoder_shape_closure():
    # composing the strided encoder then mirrored decoder returns spatial dims
    rng = np.random.default_rng(8)
    strides = (2, 2, 2, 2)
    enc = [nn.Conv2d(1 if i == 0 else 4, 4, 5, stride=s, rng=rng) for i, s in enumerate(strides)]
    dec = [nn.ConvTranspose2d(4, 4 if i < len(strides) - 1 else 1, 5, stride=s, rng=rng)
           for i, s in enumerate(reversed(strides))]
    for hw in (32, 64, 96):
        x = nn.Tensor(np.zeros((1, 1, hw, hw), dtype=np.float32))
        for layer in enc:
            x = layer(x)
        for layer in dec:
            x = layer(x)
        assert x.shape[2:] == (hw, hw)
