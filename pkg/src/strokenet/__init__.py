"""Two-stream pose-augmented 3D CNN for stroke classification and detection."""

from .tensor import Tensor, backward, no_grad
from .optim import OptimizerConfig, Parameter, sgd_step, zero_grads
from .gradcheck import grad_check
from .model import (
    ModelConfig, TwoStreamNet, fuse_outputs, init_model, load_checkpoint,
    model_forward, save_checkpoint,
)
from .pose import (
    Keypoint, PersonPose, PoseFrame, SkeletonSpec, compose_frame,
    parse_keypoint_stream, rasterize_skeleton,
)
from .data import (
    StrokeAnnotation, SyntheticSpec, VideoAnnotations, generate_synthetic,
    load_annotations, load_frame_sequence, normalize, write_synthetic_dataset,
)
from .decision import (
    DecisionMethod, Segment, WindowPrediction, aggregate_clip,
    average_precision, classification_metrics, extract_segments, map_score,
    temporal_iou, vote_sliding_window,
)
from .training import RunConfig, classify_clip, detect_video, load_video, train

__version__ = "0.1.0"

__all__ = [
    "Tensor", "backward", "no_grad",
    "OptimizerConfig", "Parameter", "sgd_step", "zero_grads",
    "grad_check",
    "ModelConfig", "TwoStreamNet", "fuse_outputs", "init_model",
    "load_checkpoint", "model_forward", "save_checkpoint",
    "Keypoint", "PersonPose", "PoseFrame", "SkeletonSpec", "compose_frame",
    "parse_keypoint_stream", "rasterize_skeleton",
    "StrokeAnnotation", "SyntheticSpec", "VideoAnnotations",
    "generate_synthetic", "load_annotations", "load_frame_sequence",
    "normalize", "write_synthetic_dataset",
    "DecisionMethod", "Segment", "WindowPrediction", "aggregate_clip",
    "average_precision", "classification_metrics", "extract_segments",
    "map_score", "temporal_iou", "vote_sliding_window",
    "RunConfig", "classify_clip", "detect_video", "load_video", "train",
]
