from .blocks import CoderArch, HyperCoder  # noqa: F401
from .modenet import ModeNet, modenet_arch  # noqa: F401
from .codecnet import CodecNet, codecnet_arch, CODEC_MODES  # noqa: F401
