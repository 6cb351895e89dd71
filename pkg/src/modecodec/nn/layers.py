"""Parameter/Module containers and the layer set used by the codec networks."""

from __future__ import annotations

import math

import numpy as np

from . import tensor as T
from .functional import causal_mask, conv2d, conv_transpose2d, gdn
from .tensor import ShapeError, Tensor

__all__ = [
    "Parameter",
    "Module",
    "Sequential",
    "Conv2d",
    "ConvTranspose2d",
    "MaskedConv2d",
    "GDN",
    "LeakyReLU",
    "inv_softplus",
]

GAMMA_EPS = 1e-6  # floor applied to reparameterized GDN weights


def inv_softplus(y: float) -> float:
    """Inverse of log(1 + e^x); used to initialize reparameterized params."""
    return float(np.log(np.expm1(y)))


class Parameter(Tensor):
    __slots__ = ("trainable",)

    def __init__(self, data, dtype=np.float32):
        super().__init__(np.asarray(data, dtype=dtype), requires_grad=True)
        self.trainable = True


class Module:
    """Minimal module tree: child modules and parameters found by attribute walk."""

    def named_parameters(self, prefix: str = ""):
        for name, value in vars(self).items():
            if isinstance(value, Parameter):
                yield (f"{prefix}{name}", value)
            elif isinstance(value, Module):
                yield from value.named_parameters(f"{prefix}{name}.")
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        yield from item.named_parameters(f"{prefix}{name}.{i}.")
                    elif isinstance(item, Parameter):
                        yield (f"{prefix}{name}.{i}", item)

    def parameters(self):
        for _, p in self.named_parameters():
            yield p

    def count_parameters(self) -> int:
        return int(sum(p.data.size for p in self.parameters()))

    def set_trainable(self, flag: bool):
        for p in self.parameters():
            p.trainable = flag

    def zero_grad(self):
        for p in self.parameters():
            p.grad = None

    def state_checksum(self) -> int:
        """Order-sensitive hash of all parameter bytes; detects any mutation."""
        import zlib

        crc = 0
        for name, p in sorted(self.named_parameters()):
            crc = zlib.crc32(name.encode(), crc)
            crc = zlib.crc32(np.ascontiguousarray(p.data).tobytes(), crc)
        return crc

    def astype(self, dtype):
        for p in self.parameters():
            p.data = p.data.astype(dtype)
        return self


class Sequential(Module):
    def __init__(self, *mods):
        self.mods = list(mods)

    def __call__(self, x: Tensor) -> Tensor:
        for m in self.mods:
            x = m(x)
        return x

    def __getitem__(self, i):
        return self.mods[i]


def _fan_init(rng: np.random.Generator, shape, fan_in: int, dtype) -> np.ndarray:
    scale = math.sqrt(2.0 / fan_in)
    return (rng.standard_normal(shape) * scale).astype(dtype)


class Conv2d(Module):
    def __init__(self, cin, cout, kernel, stride=1, padding=None, bias=True,
                 rng=None, zero_init=False, dtype=np.float32):
        if padding is None:
            padding = kernel // 2
        self.cin, self.cout = cin, cout
        self.kernel, self.stride, self.padding = kernel, stride, padding
        if zero_init:
            w = np.zeros((cout, cin, kernel, kernel), dtype=dtype)
        else:
            w = _fan_init(rng, (cout, cin, kernel, kernel), cin * kernel * kernel, dtype)
        self.weight = Parameter(w, dtype=dtype)
        self.bias = Parameter(np.zeros(cout, dtype=dtype), dtype=dtype) if bias else None

    def __call__(self, x: Tensor) -> Tensor:
        return conv2d(x, self.weight, self.bias, self.stride, self.padding)


class ConvTranspose2d(Module):
    def __init__(self, cin, cout, kernel, stride=1, padding=None, output_padding=None,
                 bias=True, rng=None, zero_init=False, dtype=np.float32):
        if padding is None:
            padding = kernel // 2
        if output_padding is None:
            output_padding = stride - 1
        self.cin, self.cout = cin, cout
        self.kernel, self.stride = kernel, stride
        self.padding, self.output_padding = padding, output_padding
        if zero_init:
            w = np.zeros((cin, cout, kernel, kernel), dtype=dtype)
        else:
            w = _fan_init(rng, (cin, cout, kernel, kernel), cin * kernel * kernel, dtype)
        self.weight = Parameter(w, dtype=dtype)
        self.bias = Parameter(np.zeros(cout, dtype=dtype), dtype=dtype) if bias else None

    def __call__(self, x: Tensor) -> Tensor:
        return conv_transpose2d(x, self.weight, self.bias, self.stride,
                                self.padding, self.output_padding)


class MaskedConv2d(Module):
    """Convolution whose kernel is zeroed at and/or after the raster center.

    With the exclusive mask, output position i depends only on input positions
    strictly before i in raster order; the inclusive mask also sees position i.
    """

    def __init__(self, cin, cout, kernel, inclusive=False, bias=True, rng=None, dtype=np.float32):
        if kernel % 2 == 0:
            raise ShapeError(f"masked convolution needs an odd kernel, got {kernel}")
        self.cin, self.cout, self.kernel = cin, cout, kernel
        self.inclusive = inclusive
        self.mask = causal_mask(kernel, inclusive, dtype=dtype)
        w = _fan_init(rng, (cout, cin, kernel, kernel), cin * kernel * kernel, dtype)
        self.weight = Parameter(w, dtype=dtype)
        self.bias = Parameter(np.zeros(cout, dtype=dtype), dtype=dtype) if bias else None

    def masked_weight(self) -> Tensor:
        return T.mul(self.weight, Tensor(self.mask.astype(self.weight.data.dtype)))

    def __call__(self, x: Tensor) -> Tensor:
        return conv2d(x, self.masked_weight(), self.bias, stride=1, padding=self.kernel // 2)


class GDN(Module):
    """GDN / IGDN layer with softplus reparameterization.

    Effective params: beta = beta_min + softplus(beta_raw) >= beta_min,
    gamma = gamma_eps + softplus(gamma_raw) > 0.
    """

    def __init__(self, channels, inverse=False, beta_min=1e-6, dtype=np.float32):
        self.channels = channels
        self.inverse = inverse
        self.beta_min = beta_min
        beta0 = inv_softplus(1.0 - beta_min)
        self.beta_raw = Parameter(np.full(channels, beta0, dtype=dtype), dtype=dtype)
        g0 = np.full((channels, channels), inv_softplus(GAMMA_EPS), dtype=dtype)
        np.fill_diagonal(g0, inv_softplus(0.1))
        self.gamma_raw = Parameter(g0, dtype=dtype)

    def effective_params(self):
        beta = T.add(T.softplus(self.beta_raw), self.beta_min)
        gamma = T.add(T.softplus(self.gamma_raw), GAMMA_EPS)
        return beta, gamma

    def __call__(self, x: Tensor) -> Tensor:
        beta, gamma = self.effective_params()
        return gdn(x, beta, gamma, inverse=self.inverse)


class LeakyReLU(Module):
    def __init__(self, slope=0.01):
        self.slope = slope

    def __call__(self, x: Tensor) -> Tensor:
        return T.leaky_relu(x, self.slope)
