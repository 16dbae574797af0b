"""Dataset assembly, the training loop, and batched inference.

A run is driven by one JSON config (see RunConfig). Videos come from a
synthetic-dataset root (manifest.json plus one directory per video, each
holding frames/, keypoints.jsonl and annotations.json). Stream pixels
(rgb / pose / prgb) are rendered once per video and cached in memory;
windows index into them.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import (
    VideoAnnotations, load_annotations, load_frame_sequence,
    sample_class_windows, sample_detection_windows, sliding_window_starts,
)
from .decision import (
    CLIP_METHODS, CURVE_METHODS, DecisionMethod, WindowPrediction,
    aggregate_clip, extract_segments, stroke_probability_curve,
)
from .model import (
    ModelConfig, TwoStreamNet, init_model, model_forward, save_checkpoint,
)
from .optim import OptimizerConfig, sgd_step
from .pose import (
    BLACK, OVERLAY, PoseFrame, SkeletonSpec, compose_frame,
    parse_keypoint_stream,
)
from .tensor import Tensor, backward, cross_entropy, no_grad

STREAM_KINDS = ("rgb", "pose", "prgb")

CLASSIFY = "classify"
DETECT = "detect"


class TrainingDiverged(RuntimeError):
    def __init__(self, epoch: int):
        super().__init__(f"loss became non-finite at epoch {epoch}")
        self.epoch = epoch


@dataclass
class RunConfig:
    model: ModelConfig
    optimizer: OptimizerConfig
    data_dir: str
    out_dir: str
    streams: tuple = ("rgb", "pose")
    task: str = CLASSIFY
    seed: int = 0
    batch_size: int = 8
    negative_ratio: float = 1.0
    val_fraction: float = 0.0
    stop_at_accuracy: float | None = None
    decision: DecisionMethod = field(default_factory=lambda: DecisionMethod("mean"))
    threshold: float = 0.5
    min_length: int = 2

    def __post_init__(self):
        self.streams = tuple(self.streams)
        if len(self.streams) not in (1, 2):
            raise ValueError(f"streams: need 1 or 2 entries, got {self.streams}")
        for kind in self.streams:
            if kind not in STREAM_KINDS:
                raise ValueError(f"streams: unknown input kind {kind!r}")
        if len(self.streams) != self.model.streams:
            raise ValueError(
                f"streams: {len(self.streams)} inputs configured but the model "
                f"has {self.model.streams} branches")
        if self.task not in (CLASSIFY, DETECT):
            raise ValueError(f"task: must be classify or detect, got {self.task!r}")
        if self.task == DETECT and self.model.num_classes != 2:
            raise ValueError("task: detection needs a 2-class model")
        if self.batch_size < 1:
            raise ValueError(f"batch_size: must be >= 1, got {self.batch_size}")
        if not 0.0 <= self.val_fraction < 1.0:
            raise ValueError(f"val_fraction: must be in [0,1), got {self.val_fraction}")

    @classmethod
    def from_dict(cls, doc: dict) -> "RunConfig":
        doc = dict(doc)
        model = ModelConfig.from_dict(doc.pop("model", {}))
        optimizer = OptimizerConfig.from_dict(doc.pop("optimizer", {}))
        decision = doc.pop("decision", None)
        if decision is not None:
            doc["decision"] = DecisionMethod(**decision)
        return cls(model=model, optimizer=optimizer, **doc)

    @classmethod
    def from_json(cls, path) -> "RunConfig":
        with open(Path(path), "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


# ---------------------------------------------------------------------------
# dataset

@dataclass
class LoadedVideo:
    name: str
    annotations: VideoAnnotations
    streams: dict          # kind -> (F,H,W,3) f32 pixels in [0,1]

    @property
    def frame_count(self) -> int:
        return self.annotations.frame_count


def render_streams(frames: np.ndarray, poses, kinds,
                   spec: SkeletonSpec | None = None) -> dict:
    """Per-stream (F,H,W,3) f32 pixel stacks for the requested kinds."""
    spec = spec or SkeletonSpec()
    out = {}
    for kind in set(kinds):
        if kind == "rgb":
            out[kind] = frames
            continue
        mode = BLACK if kind == "pose" else OVERLAY
        rendered = np.empty_like(frames)
        for f in range(frames.shape[0]):
            base_u8 = (frames[f] * 255.0 + 0.5).astype(np.uint8)
            pose_frame = poses[f] if f < len(poses) else PoseFrame(f)
            img = compose_frame(mode, base_u8, pose_frame, spec)
            rendered[f] = img.astype(np.float32) / 255.0
        out[kind] = rendered
    return out


def load_dataset(root, kinds, spec: SkeletonSpec | None = None) -> list:
    """Load every video listed by manifest.json under root."""
    root = Path(root)
    manifest_path = root / "manifest.json"
    if not manifest_path.exists():
        raise FileNotFoundError(f"no manifest.json in {root}")
    with open(manifest_path, "r", encoding="utf-8") as fh:
        manifest = json.load(fh)
    videos = []
    for name in manifest["videos"]:
        videos.append(load_video(root / name, kinds, spec))
    return videos


def load_video(vdir, kinds, spec: SkeletonSpec | None = None) -> LoadedVideo:
    vdir = Path(vdir)
    frames_dir = vdir / "frames"
    seq = load_frame_sequence(frames_dir if frames_dir.is_dir() else vdir)
    frames = seq.read_all()
    ann_path = vdir / "annotations.json"
    if ann_path.exists():
        ann = load_annotations(ann_path)
    else:
        ann = VideoAnnotations(vdir.name, seq.frame_count, [])
    poses = []
    kp_path = vdir / "keypoints.jsonl"
    if kp_path.exists():
        poses = parse_keypoint_stream(kp_path)
    elif any(k in ("pose", "prgb") for k in kinds):
        raise FileNotFoundError(f"{vdir} has no keypoints.jsonl but a pose "
                                f"stream was requested")
    streams = render_streams(frames, poses, kinds, spec)
    return LoadedVideo(vdir.name, ann, streams)


def window_clip(video: LoadedVideo, kind: str, indices: np.ndarray) -> np.ndarray:
    """(3,T,H,W) f32 clip for one stream."""
    return video.streams[kind][indices].transpose(3, 0, 1, 2)


# ---------------------------------------------------------------------------
# training

def _batch_tensors(videos, samples, kinds):
    clips = {kind: [] for kind in kinds}
    labels = []
    for video_idx, sample in samples:
        video = videos[video_idx]
        indices = sample.frame_indices()
        for kind in kinds:
            clips[kind].append(window_clip(video, kind, indices))
        labels.append(sample.label)
    stacked = [Tensor(np.ascontiguousarray(np.stack(clips[kind])))
               for kind in kinds]
    return stacked, np.asarray(labels)


def _epoch_samples(videos, run: RunConfig, rng) -> list:
    t = run.model.input_size[2]
    samples = []
    for idx, video in enumerate(videos):
        if run.task == CLASSIFY:
            drawn = sample_class_windows(video.annotations, t, rng)
        else:
            drawn = sample_detection_windows(video.annotations, t, rng,
                                             run.negative_ratio)
        samples.extend((idx, s) for s in drawn)
    order = rng.permutation(len(samples))
    return [samples[i] for i in order]


def _forward_batch(net, stacked):
    if len(stacked) == 1:
        return model_forward(net, stacked[0])
    return model_forward(net, stacked[0], stacked[1])


def evaluate_windows(net: TwoStreamNet, videos, run: RunConfig, rng) -> float:
    """Accuracy over freshly sampled windows, without touching weights."""
    correct = total = 0
    with no_grad():
        samples = _epoch_samples(videos, run, rng)
        for i in range(0, len(samples), run.batch_size):
            stacked, labels = _batch_tensors(videos, samples[i:i + run.batch_size],
                                             run.streams)
            probs = _forward_batch(net, stacked)
            correct += int((np.argmax(probs.data, axis=1) == labels).sum())
            total += len(labels)
    return correct / total if total else 0.0


def train(run: RunConfig, progress=None) -> dict:
    """Train per the run config; returns a summary with history and paths.

    Writes <out_dir>/log.jsonl (one JSON line per epoch), final.ckpt, and
    best.ckpt (best validation accuracy, or best train accuracy when no
    validation split is configured).
    """
    out_dir = Path(run.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    videos = load_dataset(run.data_dir, run.streams)
    _check_video_dims(videos, run.model)

    rng = np.random.default_rng(run.seed)
    net = init_model(run.model, run.seed)

    n_val = int(round(len(videos) * run.val_fraction))
    if n_val:
        order = rng.permutation(len(videos))
        val_videos = [videos[i] for i in order[:n_val]]
        train_videos = [videos[i] for i in order[n_val:]]
    else:
        val_videos = []
        train_videos = videos

    history = []
    best_metric = -1.0
    best_path = out_dir / "best.ckpt"
    final_path = out_dir / "final.ckpt"
    log_path = out_dir / "log.jsonl"

    with open(log_path, "w", encoding="utf-8") as log:
        for epoch in range(run.optimizer.epochs):
            samples = _epoch_samples(train_videos, run, rng)
            loss_sum = 0.0
            correct = 0
            for i in range(0, len(samples), run.batch_size):
                stacked, labels = _batch_tensors(
                    train_videos, samples[i:i + run.batch_size], run.streams)
                probs = _forward_batch(net, stacked)
                loss = cross_entropy(probs, labels)
                value = loss.item()
                if not math.isfinite(value):
                    raise TrainingDiverged(epoch)
                net.zero_grad()
                backward(loss)
                sgd_step(net.parameters(), run.optimizer)
                loss_sum += value * len(labels)
                correct += int((np.argmax(probs.data, axis=1) == labels).sum())
            row = {
                "epoch": epoch,
                "loss": loss_sum / len(samples),
                "accuracy": correct / len(samples),
            }
            if val_videos:
                row["val_accuracy"] = evaluate_windows(
                    net, val_videos, run, np.random.default_rng(run.seed + epoch))
            history.append(row)
            log.write(json.dumps(row, sort_keys=True) + "\n")
            metric = row.get("val_accuracy", row["accuracy"])
            if metric > best_metric:
                best_metric = metric
                save_checkpoint(net, best_path)
            if progress is not None:
                progress(row)
            if run.stop_at_accuracy is not None and \
                    row["accuracy"] >= run.stop_at_accuracy:
                break
    if best_metric < 0:
        save_checkpoint(net, best_path)   # zero-epoch run: best == init
    save_checkpoint(net, final_path)
    return {
        "history": history,
        "final_checkpoint": str(final_path),
        "best_checkpoint": str(best_path),
        "log": str(log_path),
        "epochs_run": len(history),
    }


def _check_video_dims(videos, cfg: ModelConfig) -> None:
    w, h, t, _ = cfg.input_size
    for video in videos:
        pixels = next(iter(video.streams.values()))
        vh, vw = pixels.shape[1:3]
        if (vw, vh) != (w, h):
            raise ValueError(
                f"video {video.name!r} is {vw}x{vh} but the model expects "
                f"{w}x{h}")
        if video.frame_count < 1:
            raise ValueError(f"video {video.name!r} is empty")


# ---------------------------------------------------------------------------
# batched inference

def predict_windows(net: TwoStreamNet, video: LoadedVideo, kinds,
                    starts, length: int, batch_size: int = 32) -> list:
    """WindowPrediction per start, batching forwards under no_grad."""
    preds = []
    with no_grad():
        for i in range(0, len(starts), batch_size):
            chunk = starts[i:i + batch_size]
            clips = {kind: [] for kind in kinds}
            for start in chunk:
                idx = np.clip(np.arange(start, start + length),
                              0, video.frame_count - 1)
                for kind in kinds:
                    clips[kind].append(window_clip(video, kind, idx))
            stacked = [Tensor(np.ascontiguousarray(np.stack(clips[kind])))
                       for kind in kinds]
            probs = _forward_batch(net, stacked)
            for row, start in enumerate(chunk):
                preds.append(WindowPrediction(int(start), length,
                                              probs.data[row].astype(np.float64)))
    return preds


def classify_clip(net: TwoStreamNet, video: LoadedVideo, run: RunConfig):
    """Aggregate sliding windows over one clip into (probs, label, n_windows)."""
    if run.decision.variant not in CLIP_METHODS:
        raise ValueError(
            f"decision {run.decision.variant!r} does not apply to clip "
            f"classification (pick one of {', '.join(CLIP_METHODS)})")
    t = run.model.input_size[2]
    starts = sliding_window_starts(video.frame_count, t, run.decision.stride)
    if not starts:
        starts = [0]   # shorter clip: one edge-padded window
    preds = predict_windows(net, video, run.streams, starts, t,
                            batch_size=max(run.batch_size, 8))
    probs, label = aggregate_clip(preds, run.decision,
                                  center=video.frame_count / 2.0)
    return probs, label, len(preds)


def detect_video(net: TwoStreamNet, video: LoadedVideo, run: RunConfig):
    """Sliding windows -> per-frame curve -> segments. Returns (segments,
    curve, n_windows); empty when the video is shorter than one window."""
    if run.decision.variant not in CURVE_METHODS:
        raise ValueError(
            f"decision {run.decision.variant!r} does not define a per-frame "
            f"curve (pick one of {', '.join(CURVE_METHODS)})")
    t = run.model.input_size[2]
    starts = sliding_window_starts(video.frame_count, t, run.decision.stride)
    if not starts:
        return [], np.zeros(video.frame_count), 0
    preds = predict_windows(net, video, run.streams, starts, t,
                            batch_size=max(run.batch_size, 8))
    curve = stroke_probability_curve(preds, video.frame_count, run.decision)
    segments = extract_segments(curve, run.threshold, run.min_length)
    return segments, curve, len(preds)
