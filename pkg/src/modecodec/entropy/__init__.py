from .quantize import (  # noqa: F401
    quantize_train,
    quantize_infer,
    round_half_away,
    LatentRangeError,
    SYMBOL_BOUND,
)
from .laplace import rate_estimate, laplace_bin_mass, RateStats, B_MIN, B_MAX, PROB_FLOOR  # noqa: F401
from .cdf import CdfTable, CdfRow, get_table, TOTAL_FREQ, ESCAPE_PAYLOAD_BITS  # noqa: F401
from .coder import RangeEncoder, RangeDecoder, CoderError, FLUSH_BYTES  # noqa: F401
from .bitstream import (  # noqa: F401
    BitstreamHeader,
    BitstreamError,
    pack_bitstream,
    unpack_bitstream,
    HEADER_BYTES,
    FLAG_MODENET,
    FLAG_CONTEXT,
    CODEC_CONFIG_CODES,
)
from .oracle import empirical_entropies, EntropyReport  # noqa: F401
