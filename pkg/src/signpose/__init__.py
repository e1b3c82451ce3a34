"""signpose: isolated sign language recognition over pose-keypoint sequences.

The pipeline mirrors its building blocks: keypoint files -> normalization ->
(train-time) augmentation -> LSTM/transformer classifiers -> top-1/top-5
evaluation, all reproducible from explicit seeds.
"""

from .augment import AugmentConfig, augment_sequence, jitter, scale_skeleton, temporal_dropout
from .dataset import (
    GlossStats,
    Manifest,
    ManifestEntry,
    base_gloss,
    downsample,
    gloss_stats,
    load_manifest,
    save_manifest,
    synth_manifest,
    top_k_glosses,
)
from .estimators import (
    PoseLSTMClassifier,
    PoseTransformerClassifier,
    SequenceAugmenter,
    SequenceNormalizer,
)
from .keypoints import (
    HOLISTIC_79,
    LandmarkLayout,
    PoseFrame,
    PoseSequence,
    SynthSpec,
    parse_keypoint_file,
    resample_temporal,
    synth_gloss_sequence,
    validate_sequence,
    write_keypoint_file,
)
from .models import (
    Checkpoint,
    PoseLSTMConfig,
    PoseTransformerConfig,
    load_checkpoint,
    param_count,
    save_checkpoint,
)
from .normalize import (
    NormalizationStrategy,
    face_com,
    normalize_sequence,
    per_frame_com,
    per_frame_scale,
)
from .train import (
    EpochMetrics,
    TrainConfig,
    TrainingDivergedError,
    evaluate,
    run_ablation,
    top_k_accuracy,
    train,
)

__version__ = "0.1.0"

__all__ = [
    "AugmentConfig",
    "Checkpoint",
    "EpochMetrics",
    "GlossStats",
    "HOLISTIC_79",
    "LandmarkLayout",
    "Manifest",
    "ManifestEntry",
    "NormalizationStrategy",
    "PoseFrame",
    "PoseLSTMClassifier",
    "PoseLSTMConfig",
    "PoseSequence",
    "PoseTransformerClassifier",
    "PoseTransformerConfig",
    "SequenceAugmenter",
    "SequenceNormalizer",
    "SynthSpec",
    "TrainConfig",
    "TrainingDivergedError",
    "augment_sequence",
    "base_gloss",
    "downsample",
    "evaluate",
    "face_com",
    "gloss_stats",
    "jitter",
    "load_checkpoint",
    "load_manifest",
    "normalize_sequence",
    "param_count",
    "parse_keypoint_file",
    "per_frame_com",
    "per_frame_scale",
    "resample_temporal",
    "run_ablation",
    "save_checkpoint",
    "save_manifest",
    "scale_skeleton",
    "synth_gloss_sequence",
    "synth_manifest",
    "temporal_dropout",
    "top_k_accuracy",
    "top_k_glosses",
    "train",
    "validate_sequence",
    "write_keypoint_file",
    "__version__",
]
