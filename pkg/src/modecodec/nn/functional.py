"""Convolution, pooling and normalization primitives.

Convolutions are cross-correlations (no kernel flip) computed with im2col +
BLAS matmuls. Weight layouts: conv2d uses (out, in, kh, kw), conv_transpose2d
uses (in, out, kh, kw).
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import as_strided

from .tensor import ShapeError, Tensor, _as_tensor

__all__ = [
    "conv2d",
    "conv_transpose2d",
    "avg_pool2",
    "conv_out_dim",
    "tconv_out_dim",
    "causal_mask",
    "gdn",
]


def conv_out_dim(size: int, kernel: int, stride: int, padding: int) -> int:
    return (size + 2 * padding - kernel) // stride + 1


def tconv_out_dim(size: int, kernel: int, stride: int, padding: int, output_padding: int) -> int:
    return (size - 1) * stride - 2 * padding + kernel + output_padding


def _im2col(xp: np.ndarray, kh: int, kw: int, stride: int) -> np.ndarray:
    """(N, C, H, W) padded input -> (N, C*kh*kw, L) patch matrix (copies)."""
    n, c, h, w = xp.shape
    ho = (h - kh) // stride + 1
    wo = (w - kw) // stride + 1
    sn, sc, sh, sw = xp.strides
    view = as_strided(
        xp,
        shape=(n, c, kh, kw, ho, wo),
        strides=(sn, sc, sh, sw, sh * stride, sw * stride),
    )
    return np.ascontiguousarray(view).reshape(n, c * kh * kw, ho * wo), ho, wo


def _col2im(cols: np.ndarray, out_shape, kh: int, kw: int, stride: int) -> np.ndarray:
    """Adjoint of _im2col: scatter-add patches back to (N, C, H, W)."""
    n, c, h, w = out_shape
    ho = (h - kh) // stride + 1
    wo = (w - kw) // stride + 1
    cols6 = cols.reshape(n, c, kh, kw, ho, wo)
    out = np.zeros(out_shape, dtype=cols.dtype)
    for i in range(kh):
        for j in range(kw):
            out[:, :, i : i + stride * ho : stride, j : j + stride * wo : stride] += cols6[:, :, i, j]
    return out


def conv2d(x: Tensor, weight: Tensor, bias: Tensor | None, stride: int = 1, padding: int = 0) -> Tensor:
    """Strided cross-correlation. x: (N,Cin,H,W), weight: (Cout,Cin,kh,kw)."""
    n, cin, h, w = x.shape
    cout, win, kh, kw = weight.shape
    if cin != win:
        raise ShapeError(f"conv2d: input has {cin} channels but weight expects {win}")
    if conv_out_dim(h, kh, stride, padding) < 1 or conv_out_dim(w, kw, stride, padding) < 1:
        raise ShapeError(
            f"conv2d: kernel {kh}x{kw}/{stride} pad {padding} on {h}x{w} input yields empty output"
        )
    xp = np.pad(x.data, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    cols, ho, wo = _im2col(xp, kh, kw, stride)
    w2 = weight.data.reshape(cout, cin * kh * kw)
    out = np.matmul(w2[None], cols)  # (N, Cout, L)
    out = out.reshape(n, cout, ho, wo)
    if bias is not None:
        out = out + bias.data.reshape(1, cout, 1, 1)
    parents = (x, weight) if bias is None else (x, weight, bias)

    def backward(g):
        g2 = g.reshape(n, cout, ho * wo)
        if bias is not None and bias.requires_grad:
            bias._accumulate(g2.sum(axis=(0, 2)))
        if weight.requires_grad:
            dw = np.matmul(g2, cols.transpose(0, 2, 1)).sum(axis=0)
            weight._accumulate(dw.reshape(weight.shape))
        if x.requires_grad:
            dcols = np.matmul(w2.T[None], g2)
            dxp = _col2im(dcols, xp.shape, kh, kw, stride)
            if padding:
                dxp = dxp[:, :, padding:-padding or None, padding:-padding or None]
            x._accumulate(dxp)

    return Tensor._from_op(out, parents, backward)


def conv_transpose2d(
    x: Tensor,
    weight: Tensor,
    bias: Tensor | None,
    stride: int = 1,
    padding: int = 0,
    output_padding: int = 0,
) -> Tensor:
    """Transposed (fractionally-strided) convolution. weight: (Cin,Cout,kh,kw)."""
    n, cin, h, w = x.shape
    win, cout, kh, kw = weight.shape
    if cin != win:
        raise ShapeError(f"conv_transpose2d: input has {cin} channels but weight expects {win}")
    if output_padding >= stride:
        raise ShapeError(f"conv_transpose2d: output_padding {output_padding} must be < stride {stride}")
    hf = (h - 1) * stride + kh
    wf = (w - 1) * stride + kw
    ht = tconv_out_dim(h, kh, stride, padding, output_padding)
    wt = tconv_out_dim(w, kw, stride, padding, output_padding)
    if ht < 1 or wt < 1:
        raise ShapeError(f"conv_transpose2d: output dims {ht}x{wt} not positive")
    w2 = weight.data.reshape(cin, cout * kh * kw)
    x2 = x.data.reshape(n, cin, h * w)
    cols = np.matmul(w2.T[None], x2)  # (N, Cout*kh*kw, H*W)
    full = _col2im(cols, (n, cout, hf, wf), kh, kw, stride)
    out = full[:, :, padding : padding + ht, padding : padding + wt]
    out = np.ascontiguousarray(out)
    if bias is not None:
        out = out + bias.data.reshape(1, cout, 1, 1)
    parents = (x, weight) if bias is None else (x, weight, bias)

    def backward(g):
        if bias is not None and bias.requires_grad:
            bias._accumulate(g.sum(axis=(0, 2, 3)))
        gfull = np.zeros((n, cout, hf, wf), dtype=g.dtype)
        gfull[:, :, padding : padding + ht, padding : padding + wt] = g
        gcols, _, _ = _im2col(gfull, kh, kw, stride)  # (N, Cout*kh*kw, H*W)
        if x.requires_grad:
            dx = np.matmul(w2[None], gcols)
            x._accumulate(dx.reshape(x.shape))
        if weight.requires_grad:
            dw = np.matmul(x2, gcols.transpose(0, 2, 1)).sum(axis=0)
            weight._accumulate(dw.reshape(weight.shape))

    return Tensor._from_op(out, parents, backward)


def avg_pool2(x: Tensor) -> Tensor:
    """2x2 average pooling with stride 2; requires even spatial dims."""
    n, c, h, w = x.shape
    if h % 2 or w % 2:
        raise ShapeError(f"avg_pool2 needs even spatial dims, got {h}x{w}")
    data = x.data.reshape(n, c, h // 2, 2, w // 2, 2).mean(axis=(3, 5))

    def backward(g):
        gx = np.repeat(np.repeat(g, 2, axis=2), 2, axis=3) * 0.25
        x._accumulate(gx.astype(x.data.dtype))

    return Tensor._from_op(data, (x,), backward)


def causal_mask(kernel: int, inclusive: bool, dtype=np.float32) -> np.ndarray:
    """Raster-order causal mask for a square kernel, shape (1, 1, k, k).

    Exclusive masks zero the center tap and everything after it; inclusive
    masks keep the center. Requires an odd kernel so the center is defined.
    """
    if kernel % 2 == 0:
        raise ShapeError(f"masked convolution needs an odd kernel, got {kernel}")
    m = np.ones((kernel, kernel), dtype=dtype)
    c = kernel // 2
    m[c, c + (1 if inclusive else 0) :] = 0
    m[c + 1 :, :] = 0
    return m.reshape(1, 1, kernel, kernel)


def gdn(x: Tensor, beta: Tensor, gamma: Tensor, inverse: bool = False) -> Tensor:
    """Generalized divisive normalization (square/sqrt form).

    y_c = x_c / sqrt(beta_c + sum_j gamma_cj * x_j^2) per spatial position;
    the inverse variant multiplies instead. beta: (C,), gamma: (C, C).
    """
    from . import tensor as T

    c = x.shape[1]
    if beta.shape != (c,) or gamma.shape != (c, c):
        raise ShapeError(
            f"gdn: params beta{tuple(beta.shape)} / gamma{tuple(gamma.shape)} do not match C={c}"
        )
    if np.any(beta.data <= 0):
        raise ValueError("gdn: beta must be strictly positive after reparameterization")
    xsq = T.square(x)
    gamma_w = reshape_weight_1x1(gamma)
    norm = conv2d(xsq, gamma_w, None, stride=1, padding=0)
    norm = T.add(norm, reshape_bias(beta))
    root = T.sqrt(norm)
    return T.mul(x, root) if inverse else T.div(x, root)


def reshape_weight_1x1(gamma: Tensor) -> Tensor:
    from .tensor import reshape

    c = gamma.shape[0]
    return reshape(gamma, (c, c, 1, 1))


def reshape_bias(beta: Tensor) -> Tensor:
    from .tensor import reshape

    return reshape(beta, (1, beta.shape[0], 1, 1))
