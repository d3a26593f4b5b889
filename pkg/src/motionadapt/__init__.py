"""Motion-conditioned adaptation of frozen two-tower features for video
action recognition: a minimal autodiff core, a two-stream motion encoder,
motion-aware prompt learning, cross-modal pre-matching, and a contrastive
matching head with training and evaluation harnesses."""

from .autodiff import Tape, Tensor, backward, no_grad
from .container import (
    BadMagicError,
    ContainerError,
    FrameFeatureSequence,
    InvalidRecordError,
    TruncatedPayloadError,
    read_feature_file,
    read_token_table,
    write_feature_file,
    write_token_table,
)
from .estimator import VideoActionClassifier
from .manifest import DatasetManifest, RecordRef, load_manifest, load_split, save_manifest
from .model import ModelState, TrainConfig, forward
from .objective import EvalReport, MatchDistribution, match_probabilities, nce_loss
from .optim import MomentumSGD, cosine_lr, sgd_step
from .synth import SynthConfig, frame_mean_centroid_accuracy, synthesize_dataset
from .tokenizer import TokenTable, build_token_table, tokenize
from .training import ablate, count_params, evaluate_state, grad_check, train, train_on_records
from .video import PairSelection, encode_video, select_pairs

__version__ = "0.1.0"

__all__ = [
    "Tape",
    "Tensor",
    "backward",
    "no_grad",
    "BadMagicError",
    "ContainerError",
    "FrameFeatureSequence",
    "InvalidRecordError",
    "TruncatedPayloadError",
    "read_feature_file",
    "read_token_table",
    "write_feature_file",
    "write_token_table",
    "VideoActionClassifier",
    "DatasetManifest",
    "RecordRef",
    "load_manifest",
    "load_split",
    "save_manifest",
    "ModelState",
    "TrainConfig",
    "forward",
    "EvalReport",
    "MatchDistribution",
    "match_probabilities",
    "nce_loss",
    "MomentumSGD",
    "cosine_lr",
    "sgd_step",
    "SynthConfig",
    "frame_mean_centroid_accuracy",
    "synthesize_dataset",
    "TokenTable",
    "build_token_table",
    "tokenize",
    "ablate",
    "count_params",
    "evaluate_state",
    "grad_check",
    "train",
    "train_on_records",
    "PairSelection",
    "encode_video",
    "select_pairs",
    "__version__",
]
