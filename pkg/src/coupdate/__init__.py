"""Multi-modal template co-updating for incremental activity recognition.

A small numpy library covering the full loop: per-channel feature encoding
(joint angles, bag-of-words histograms), incremental linear classifiers,
the credibility-gated co-updating engine with class-balanced buffers, a
synthetic multi-modal data generator, and the new-person evaluation
protocol with its three comparison modes.
"""

from .bow import Codebook, encode, encode_multichannel, fit_codebook, quantize
from .buffer import BufferEntry, LabeledBuffer
from .classifier import LinearSGDClassifier, SGDHyperparams, models_equal, softmax
from .engine import (
    ChannelState,
    CoUpdatingEngine,
    EngineConfig,
    GateOutcome,
    compute_channel_weights,
    credibility,
    degree_of_certainty,
    fuse_predictions,
    gate_decision,
)
from .evaluation import (
    MODES,
    ClassMetrics,
    EvalSnapshot,
    ExperimentConfig,
    ExperimentReport,
    Partition,
    RepeatedReport,
    TrendPoint,
    accuracy_from_confusion,
    confusion_matrix,
    partition_new_person,
    precision_recall,
    run_experiment,
    run_repeated,
)
from .skeleton import (
    AngleConfig,
    Joint,
    Skeleton,
    alpha_angle,
    angle_between,
    default_angle_config,
    encode_skeleton_sequence,
    frame_vector,
    frame_vectors,
    load_skeleton_frames,
    phi_angle,
    quaternion_to_direction,
    save_skeleton_frames,
    theta_angle,
)
from .synth import ChannelSpec, StreamConfig, generate
from .types import (
    ActivityLabel,
    ChannelId,
    LabelSet,
    MultiModalSequence,
    Prediction,
    Thresholds,
    channel_dims,
    load_dataset,
    save_dataset,
)

__version__ = "0.1.0"

__all__ = [
    "ActivityLabel",
    "AngleConfig",
    "BufferEntry",
    "ChannelId",
    "ChannelSpec",
    "ChannelState",
    "ClassMetrics",
    "Codebook",
    "CoUpdatingEngine",
    "EngineConfig",
    "EvalSnapshot",
    "ExperimentConfig",
    "ExperimentReport",
    "GateOutcome",
    "Joint",
    "LabelSet",
    "LabeledBuffer",
    "LinearSGDClassifier",
    "MODES",
    "MultiModalSequence",
    "Partition",
    "Prediction",
    "RepeatedReport",
    "SGDHyperparams",
    "Skeleton",
    "StreamConfig",
    "Thresholds",
    "TrendPoint",
    "accuracy_from_confusion",
    "alpha_angle",
    "angle_between",
    "channel_dims",
    "compute_channel_weights",
    "confusion_matrix",
    "credibility",
    "default_angle_config",
    "degree_of_certainty",
    "encode",
    "encode_multichannel",
    "encode_skeleton_sequence",
    "fit_codebook",
    "frame_vector",
    "frame_vectors",
    "fuse_predictions",
    "gate_decision",
    "generate",
    "load_dataset",
    "load_skeleton_frames",
    "models_equal",
    "partition_new_person",
    "phi_angle",
    "precision_recall",
    "quantize",
    "quaternion_to_direction",
    "run_experiment",
    "run_repeated",
    "save_dataset",
    "save_skeleton_frames",
    "softmax",
    "theta_angle",
]
