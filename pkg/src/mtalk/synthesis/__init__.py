"""Stage-2 speech-to-gesture generator."""

from .config import DEFAULT_ALPHA, DEFAULT_BETA, GeneratorConfig
from .features import (
    AudioEncoder,
    FusionGates,
    SpeakerTable,
    TextEncoder,
    envelope,
    frame_windows,
    fuse_features,
    resample_matrix,
    temporal_pool,
)
from .generate import MODULE_ROWS, Generated, Models, generate, load_generator, output_frames, save_generator
from .losses import generator_loss
from .model import (
    STREAMS,
    Generator,
    GlobalScan,
    LocalScan,
    Timer,
    apply_mask,
    global_scan,
    local_scan,
    refine_queries,
)
from .train import (
    MissingStage1Error,
    check_stage1,
    encode_targets,
    evaluate_generator,
    prepare_clips,
    train_stage2,
)
