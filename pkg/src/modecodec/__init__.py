"""modecodec: learned P-frame codec with per-pixel skip/transmit mode selection."""

__version__ = "0.1.0"
