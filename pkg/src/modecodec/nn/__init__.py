from .tensor import (  # noqa: F401
    Tensor,
    ShapeError,
    NumericsError,
    no_grad,
    is_grad_enabled,
    add,
    sub,
    mul,
    div,
    neg,
    square,
    sqrt,
    exp,
    log,
    absolute,
    softplus,
    leaky_relu,
    relu,
    clip,
    maximum,
    where,
    tsum,
    mean,
    reshape,
    concat,
    narrow,
)
from .functional import (  # noqa: F401
    conv2d,
    conv_transpose2d,
    avg_pool2,
    conv_out_dim,
    tconv_out_dim,
    causal_mask,
    gdn,
)
from .layers import (  # noqa: F401
    Parameter,
    Module,
    Sequential,
    Conv2d,
    ConvTranspose2d,
    MaskedConv2d,
    GDN,
    LeakyReLU,
    inv_softplus,
)
from .optim import Adam, TrainingError, lr_at_epoch  # noqa: F401
from . import checkpoint  # noqa: F401
