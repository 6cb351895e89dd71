import numpy as np
import pytest

from modecodec import nn
from modecodec.entropy import get_table
from modecodec.models import CodecNet, ModeNet, codecnet_arch, modenet_arch


def tiny_modenet(seed=0, context=False):
    arch = modenet_arch(f=12, n=8, hyper_f=8, strides=(2, 2), context=context)
    return ModeNet(arch=arch, rng=np.random.default_rng(seed))


def tiny_codecnet(mode, seed=0, context=False):
    arch = codecnet_arch(mode, f=16, n=12, hyper_f=8, strides=(2, 2), context=context, pred_f=8)
    return CodecNet(mode=mode, arch=arch, rng=np.random.default_rng(seed), pred_width=8)


def frames(seed=0, h=32, w=32):
    rng = np.random.default_rng(seed)
    prev = rng.random((1, 3, h, w)).astype(np.float32)
    cur = np.clip(prev + rng.normal(0, 0.08, prev.shape), 0, 1).astype(np.float32)
    return nn.Tensor(prev), nn.Tensor(cur)


def test_fresh_model_emits_half_alpha():
    m = tiny_modenet()
    prev, cur = frames()
    alpha, bits = m.forward_train(prev, cur, np.random.default_rng(1))
    assert np.all(alpha.data == 0.5)
    assert alpha.shape == (1, 1, 32, 32)


def test_alpha_always_in_bounds():
    rng = np.random.default_rng(2)
    for seed in range(4):
        m = tiny_modenet(seed)
        for p in m.parameters():  # scramble hard to push outputs out of range
            p.data += rng.normal(0, 0.15, p.data.shape).astype(np.float32)
        prev, cur = frames(seed)
        alpha, _ = m.forward_train(prev, cur, rng)
        assert alpha.data.min() >= 0.0 and alpha.data.max() <= 1.0
        alpha2 = m.encode(prev, cur, get_table()).out
        assert alpha2.data.min() >= 0.0 and alpha2.data.max() <= 1.0


def test_default_modenet_parameter_budget():
    m = ModeNet(rng=np.random.default_rng(0))
    count = m.count_parameters()
    assert abs(count - 2e5) <= 0.1 * 2e5


def test_default_codecnet_ten_times_modenet():
    mc = ModeNet(rng=np.random.default_rng(0)).count_parameters()
    for mode in ("image", "difference", "conditional"):
        cc = CodecNet(mode=mode, rng=np.random.default_rng(0)).count_parameters()
        assert abs(cc - 10 * mc) <= 0.25 * 10 * mc, f"{mode}: {cc} vs 10x{mc}"


def test_single_conv_param_count():
    conv = nn.Conv2d(2, 4, 3, rng=np.random.default_rng(0))
    class Holder(nn.Module):
        def __init__(self):
            self.c = conv
    assert Holder().count_parameters() == 4 * 2 * 9 + 4


def test_modenet_stride_mismatch_rejected():
    m = tiny_modenet()
    bad = nn.Tensor(np.zeros((1, 3, 30, 32), dtype=np.float32))
    good = nn.Tensor(np.zeros((1, 3, 32, 32), dtype=np.float32))
    with pytest.raises(nn.ShapeError):
        m.forward_train(bad, bad, np.random.default_rng(0))
    with pytest.raises(nn.ShapeError):
        m.forward_train(good, nn.Tensor(np.zeros((1, 3, 64, 64), dtype=np.float32)),
                        np.random.default_rng(0))


@pytest.mark.parametrize("context", [False, True])
def test_alpha_decoder_matches_encoder_bitwise(context):
    m = tiny_modenet(seed=3, context=context)
    # scrambled weights so alpha is non-trivial
    rng = np.random.default_rng(4)
    for p in m.parameters():
        p.data += rng.normal(0, 0.1, p.data.shape).astype(np.float32)
    prev, cur = frames(5)
    table = get_table()
    res = m.encode(prev, cur, table)
    zc, yc = res.chunks
    alpha_dec, y_q_dec = m.decode(zc, yc, 32, 32, table)
    assert np.array_equal(res.y_q, y_q_dec)
    assert np.array_equal(res.out.data, alpha_dec.data)
    assert res.bits > 0


def test_modenet_rate_matches_actual_chunk_bits():
    m = tiny_modenet(seed=6)
    rng = np.random.default_rng(7)
    for p in m.parameters():
        p.data += rng.normal(0, 0.1, p.data.shape).astype(np.float32)
    prev, cur = frames(8)
    res = m.encode(prev, cur, get_table())
    bits = res.bits
    zc, yc = res.chunks
    actual = (len(zc) + len(yc)) * 8
    # coder overhead: flush bytes per chunk plus sub-bit rounding
    assert actual <= bits + 2 * 8 * 8 + 16
    assert actual >= bits - 1


@pytest.mark.parametrize("mode", ["image", "difference", "conditional"])
def test_codecnet_decode_matches_encode_bitwise(mode):
    c = tiny_codecnet(mode, seed=9)
    prev, cur = frames(10)
    table = get_table()
    res = c.encode(prev, cur, table)
    zc, yc = res.chunks
    xhat_dec, y_q_dec = c.decode(zc, yc, prev, table)
    assert np.array_equal(res.y_q, y_q_dec)
    assert np.array_equal(res.out.data, xhat_dec.data)


def test_codecnet_context_roundtrip_bitwise():
    c = tiny_codecnet("image", seed=11, context=True)
    rng = np.random.default_rng(12)
    for p in c.parameters():
        p.data += rng.normal(0, 0.2, p.data.shape).astype(np.float32)
    prev, cur = frames(13)
    table = get_table()
    res = c.encode(prev, cur, table)
    zc, yc = res.chunks
    xhat_dec, y_q_dec = c.decode(zc, yc, prev, table)
    assert np.array_equal(res.y_q, y_q_dec)
    assert np.array_equal(res.out.data, xhat_dec.data)
    actual = (len(zc) + len(yc)) * 8
    assert actual <= res.bits + 2 * 8 * 8 + 16


def test_difference_mode_zero_residual_passthrough():
    c = tiny_codecnet("difference", seed=14)
    prev, _ = frames(15)
    # identical pred/target -> residual exactly zero; force the ideal zero
    # latent by zeroing the synthesis input path
    y_shape = c.coder.latent_shape(32, 32)
    y_q = np.zeros(y_shape, dtype=np.int64)
    for layer in c.coder.g_s.layers:
        if hasattr(layer, "weight"):
            layer.weight.data[:] = 0
            if layer.bias is not None:
                layer.bias.data[:] = 0
    # raw synthesis output 0 -> residual (0 - 0.5)*2 = -1... bias to 0.5 instead
    c.coder.g_s.layers[-1].bias.data[:] = 0.5
    out = c.reconstruct(y_q, prev)
    assert np.allclose(out.data, prev.data, atol=1e-6)


def test_image_mode_ignores_prediction():
    c = tiny_codecnet("image", seed=16)
    prev, cur = frames(17)
    table = get_table()
    r1 = c.encode(prev, cur, table)
    other = nn.Tensor(np.random.default_rng(18).random((1, 3, 32, 32)).astype(np.float32))
    r2 = c.encode(other, cur, table)
    assert np.array_equal(r1.out.data, r2.out.data)
    assert r1.chunks == r2.chunks and r1.bits == r2.bits


def test_conditional_uses_prediction():
    c = tiny_codecnet("conditional", seed=19)
    rng = np.random.default_rng(20)
    for p in c.parameters():
        p.data += rng.normal(0, 0.2, p.data.shape).astype(np.float32)
    prev, cur = frames(21)
    table = get_table()
    xhat1 = c.encode(prev, cur, table).out
    other = nn.Tensor(np.random.default_rng(22).random((1, 3, 32, 32)).astype(np.float32))
    xhat2 = c.encode(other, cur, table).out
    assert not np.array_equal(xhat1.data, xhat2.data)


def test_tampered_chunk_fails_loud_or_differs():
    from modecodec.entropy import CoderError

    c = tiny_codecnet("image", seed=23)
    prev, cur = frames(24)
    table = get_table()
    res = c.encode(prev, cur, table)
    xhat, (zc, yc) = res.out, res.chunks
    bad = bytearray(yc)
    bad[len(bad) // 2] ^= 0xFF
    try:
        xhat2, _ = c.decode(zc, bytes(bad), prev, table)
        assert not np.array_equal(xhat.data, xhat2.data)
    except (CoderError, Exception):
        pass  # loud failure is acceptable; silent identical success is not


def test_mode_config_validation():
    with pytest.raises(ValueError):
        CodecNet(mode="bogus")
    with pytest.raises(ValueError):
        arch = codecnet_arch("image")
        CodecNet(mode="conditional", arch=arch)
