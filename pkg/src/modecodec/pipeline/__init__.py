from .system import (  # noqa: F401
    SystemConfig,
    PFrameSystem,
    SystemOutput,
    build_system,
    save_system,
    load_system,
    ModelMismatchError,
)
from .data import (  # noqa: F401
    SynthSpec,
    FramePair,
    synth_dataset,
    write_synth_pngs,
    make_crop_dataset,
    load_manifest,
    load_png,
    save_png,
    DatasetError,
)
from .codec import encode_pair, decode_bytes, pad_frame, EncodedFrame  # noqa: F401
from .train import TrainSchedule, TrainingAborted, train, EpochLog, write_loss_log  # noqa: F401
from .diagnostic import (  # noqa: F401
    project_rate_map,
    codec_rate_map,
    diagnostic_partition,
    PartitionDiagnostic,
)
from .evaluate import evaluate_system, eval_rd, plot_rd_curve, DEFAULT_LAMBDA_GRID  # noqa: F401
