"""nightforge: severe nighttime degradation synthesis and self-supervised
restoration.

Clear images are degraded by blending them with glow-laden light fields
and adding bounded noise; a pluggable restorer learns to invert the
degradation (self-prior learning) and is then refined on unlabeled real
degraded images through a quality-gated teacher-student loop.
"""

__version__ = "0.1.0"

from .degrade import (
    AugmentConfig,
    AugRecord,
    BlendMap,
    LightMap,
    NoiseField,
    add_glow,
    augment,
    compose,
    gen_blend_map,
    gen_noise,
    procedural_light_map,
    replay,
    resize_bilinear,
    sample_light_map,
)
from .errors import (
    CheckpointError,
    CorruptImageError,
    DataError,
    DegenerateImageWarning,
    DimensionError,
    ImageFormatError,
    MetricError,
    MetricParseError,
    MetricProcessError,
    MetricTimeoutError,
    NightforgeError,
    OptimizerError,
    TrainingError,
)
from .estimators import SelfPriorLearner, SelfRefiner, SevereAugmenter
from .image import (
    list_images,
    load_image,
    minmax_normalize,
    rms_contrast,
    save_image,
    to_grayscale,
)
from .iqa import MetricHandle, ScoreReport, score, score_directory, score_path
from .optim import AdamState, adam_step
from .refine import (
    REFERENCE_REFINE,
    ConfidenceMap,
    GateResult,
    RefineConfig,
    TeacherStudentState,
    confidence_mask,
    dump_pseudo_labels,
    ema_update,
    ensemble_predict,
    iqa_gate,
    masked_l1,
    refine_loop,
    tile_positions,
)
from .restorer import (
    LinearPatchRestorer,
    RestorerModel,
    load_checkpoint,
    model_from_checkpoint,
    save_checkpoint,
)
from .rng import RngStream
from .selfprior import (
    REFERENCE_PRIOR,
    TrainConfig,
    load_clear_set,
    reconstruction_loss,
    train_prior,
    write_loss_trace,
)

__all__ = [
    "AdamState",
    "AugmentConfig",
    "AugRecord",
    "BlendMap",
    "CheckpointError",
    "ConfidenceMap",
    "CorruptImageError",
    "DataError",
    "DegenerateImageWarning",
    "DimensionError",
    "GateResult",
    "ImageFormatError",
    "LightMap",
    "LinearPatchRestorer",
    "MetricError",
    "MetricHandle",
    "MetricParseError",
    "MetricProcessError",
    "MetricTimeoutError",
    "NightforgeError",
    "NoiseField",
    "OptimizerError",
    "REFERENCE_PRIOR",
    "REFERENCE_REFINE",
    "RefineConfig",
    "RestorerModel",
    "RngStream",
    "ScoreReport",
    "SelfPriorLearner",
    "SelfRefiner",
    "SevereAugmenter",
    "TeacherStudentState",
    "TrainConfig",
    "TrainingError",
    "add_glow",
    "adam_step",
    "augment",
    "compose",
    "confidence_mask",
    "dump_pseudo_labels",
    "ema_update",
    "ensemble_predict",
    "gen_blend_map",
    "gen_noise",
    "iqa_gate",
    "list_images",
    "load_checkpoint",
    "load_clear_set",
    "load_image",
    "masked_l1",
    "minmax_normalize",
    "model_from_checkpoint",
    "procedural_light_map",
    "reconstruction_loss",
    "refine_loop",
    "replay",
    "resize_bilinear",
    "rms_contrast",
    "sample_light_map",
    "save_checkpoint",
    "save_image",
    "score",
    "score_directory",
    "score_path",
    "tile_positions",
    "to_grayscale",
    "train_prior",
    "write_loss_trace",
]
