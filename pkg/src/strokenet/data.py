"""Frame sequences, stroke annotations, window sampling, synthetic videos.

Frames live either as a directory of zero-padded ``frame_%06d.png`` files
or as one rank-4 (T,H,W,3) f32 TTEN file with values already in [0,1].
Annotations are half-open [begin, end) frame intervals. Clip tensors are
N x 3 x T x H x W with the W axis innermost (T maps to axis 2, H to 3,
W to 4).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from . import tten
from .pose import Keypoint, PersonPose, PoseFrame
from .tensor import Tensor

FRAME_PATTERN = "frame_{:06d}.png"


class FrameSequence:
    """Uniformly-sized frames addressed by contiguous indices from 0."""

    def __init__(self, source, frames: np.ndarray | None = None):
        self.source = source
        self._frames = frames  # (F,H,W,3) f32 in [0,1] when preloaded
        if frames is not None:
            self.frame_count, self.height, self.width = frames.shape[:3]
            self._paths = None
        else:
            root = Path(source)
            paths = sorted(root.glob("frame_*.png"))
            if not paths:
                raise ValueError(f"no frame_*.png files in {root}")
            for i, p in enumerate(paths):
                if p.name != FRAME_PATTERN.format(i):
                    raise ValueError(
                        f"frame files must be contiguous from 0: expected "
                        f"{FRAME_PATTERN.format(i)}, found {p.name}")
            self._paths = paths
            first = np.asarray(Image.open(paths[0]).convert("RGB"))
            self.height, self.width = first.shape[:2]
            self.frame_count = len(paths)

    def read_frames(self, indices) -> np.ndarray:
        """Frames at the given indices as (len,H,W,3) f32 in [0,1]."""
        indices = np.asarray(indices, dtype=np.int64)
        if indices.min(initial=0) < 0 or indices.max(initial=0) >= self.frame_count:
            raise ValueError(f"frame indices outside [0,{self.frame_count})")
        if self._frames is not None:
            return self._frames[indices]
        out = np.empty((len(indices), self.height, self.width, 3), dtype=np.float32)
        for row, idx in enumerate(indices):
            img = np.asarray(Image.open(self._paths[idx]).convert("RGB"))
            if img.shape[:2] != (self.height, self.width):
                raise ValueError(
                    f"frame {idx} is {img.shape[1]}x{img.shape[0]}, expected "
                    f"{self.width}x{self.height}")
            out[row] = img.astype(np.float32) / 255.0
        return out

    def read_all(self) -> np.ndarray:
        return self.read_frames(np.arange(self.frame_count))


def load_frame_sequence(path) -> FrameSequence:
    """PNG directory or rank-4 TTEN file with values in [0,1]."""
    path = Path(path)
    if path.is_dir():
        return FrameSequence(path)
    arr = tten.read(path)
    if arr.ndim != 4 or arr.shape[3] != 3:
        raise ValueError(f"video TTEN must be (T,H,W,3), got {arr.shape}")
    if arr.min() < 0.0 or arr.max() > 1.0:
        raise ValueError("video TTEN values must lie in [0,1]")
    return FrameSequence(path, frames=arr.astype(np.float32))


def normalize(frames: np.ndarray) -> Tensor:
    """(T,H,W,3) pixels (u8 or [0,1] float) -> 1 x 3 x T x H x W f32 tensor."""
    arr = np.asarray(frames)
    if arr.ndim != 4 or arr.shape[3] != 3:
        raise ValueError(f"expected (T,H,W,3) frames, got {arr.shape}")
    if arr.dtype == np.uint8:
        arr = arr.astype(np.float32) / np.float32(255.0)
    else:
        arr = arr.astype(np.float32)
        if arr.size and (arr.min() < 0.0 or arr.max() > 1.0):
            raise ValueError("float frames must already lie in [0,1]")
    return Tensor(np.ascontiguousarray(arr.transpose(3, 0, 1, 2))[None])


def encode_video_tten(path, frames: np.ndarray) -> None:
    """Store (T,H,W,3) frames as f32 TTEN in [0,1]; u8 input is scaled."""
    arr = np.asarray(frames)
    if arr.dtype == np.uint8:
        arr = arr.astype(np.float32) / np.float32(255.0)
    tten.write(path, arr.astype(np.float32))


# ---------------------------------------------------------------------------
# annotations

@dataclass(frozen=True)
class StrokeAnnotation:
    begin: int
    end: int
    label: int


@dataclass
class VideoAnnotations:
    video: str
    frame_count: int
    strokes: list


def _validate_strokes(strokes, frame_count, num_classes=None):
    ordered = sorted(range(len(strokes)), key=lambda i: strokes[i].begin)
    for i in ordered:
        s = strokes[i]
        if not 0 <= s.begin < s.end <= frame_count:
            raise ValueError(
                f"stroke {i}: [{s.begin},{s.end}) outside [0,{frame_count})")
        if s.label < 0 or (num_classes is not None and s.label >= num_classes):
            raise ValueError(f"stroke {i}: label {s.label} out of range")
    for prev, cur in zip(ordered, ordered[1:]):
        if strokes[prev].end > strokes[cur].begin:
            raise ValueError(f"strokes {prev} and {cur} overlap: "
                             f"[{strokes[prev].begin},{strokes[prev].end}) vs "
                             f"[{strokes[cur].begin},{strokes[cur].end})")
    return [strokes[i] for i in ordered]


def load_annotations(path, num_classes: int | None = None) -> VideoAnnotations:
    with open(Path(path), "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    for key in ("video", "frame_count", "strokes"):
        if key not in doc:
            raise ValueError(f"annotation file missing {key!r}")
    strokes = [StrokeAnnotation(int(s["begin"]), int(s["end"]), int(s["label"]))
               for s in doc["strokes"]]
    strokes = _validate_strokes(strokes, int(doc["frame_count"]), num_classes)
    return VideoAnnotations(str(doc["video"]), int(doc["frame_count"]), strokes)


def save_annotations(path, ann: VideoAnnotations) -> None:
    doc = {
        "video": ann.video,
        "frame_count": ann.frame_count,
        "strokes": [{"begin": s.begin, "end": s.end, "label": s.label}
                    for s in ann.strokes],
    }
    with open(Path(path), "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# window sampling

@dataclass(frozen=True)
class WindowSample:
    """A length-T window. start may lie outside the clamp interval for
    short-stroke windows; materialized indices are clamped into it, which
    realizes edge-frame-repetition padding."""
    start: int
    length: int
    label: int
    clamp: tuple

    def frame_indices(self) -> np.ndarray:
        lo, hi = self.clamp
        return np.clip(np.arange(self.start, self.start + self.length), lo, hi - 1)


def _window_for_stroke(stroke, T, rng, label):
    span = stroke.end - stroke.begin
    if span >= T:
        start = stroke.begin + int(rng.integers(0, span - T + 1))
    else:
        start = stroke.begin - (T - span) // 2
    return WindowSample(start, T, label, (stroke.begin, stroke.end))


def sample_class_windows(annotations: VideoAnnotations, T: int, rng) -> list:
    """One window per stroke: random placement inside long strokes, centered
    with edge repetition for short ones; labeled by stroke class."""
    return [_window_for_stroke(s, T, rng, s.label) for s in annotations.strokes]


def sample_detection_windows(annotations: VideoAnnotations, T: int,
                             rng, ratio: float = 1.0) -> list:
    """Balanced stroke (label 1) / non-stroke (label 0) windows.

    Negatives are drawn uniformly (with replacement) from every start whose
    window has zero overlap with any stroke.
    """
    positives = [_window_for_stroke(s, T, rng, 1) for s in annotations.strokes]
    frame_count = annotations.frame_count
    legal = []
    for start in range(0, frame_count - T + 1):
        end = start + T
        if all(end <= s.begin or start >= s.end for s in annotations.strokes):
            legal.append(start)
    if not legal:
        raise ValueError(
            f"video {annotations.video!r} has no stroke-free room for "
            f"length-{T} negative windows")
    n_neg = int(round(len(positives) * ratio))
    starts = rng.choice(np.asarray(legal), size=n_neg, replace=True)
    negatives = [WindowSample(int(s), T, 0, (0, frame_count)) for s in starts]
    return positives + negatives


def sliding_window_starts(frame_count: int, T: int, stride: int) -> list:
    if frame_count < T:
        return []
    return list(range(0, frame_count - T + 1, stride))


# ---------------------------------------------------------------------------
# synthetic stroke videos

@dataclass
class SyntheticSpec:
    """Deterministic generator settings.

    One video per (class, clip) when videos is None, each holding
    strokes_per_clip strokes of that class; with videos set, that many
    videos are produced and stroke classes cycle through [0, num_classes).
    """
    num_classes: int = 4
    clips_per_class: int = 32
    frame_count: int = 16
    width: int = 32
    height: int = 32
    seed: int = 0
    strokes_per_clip: int = 1
    videos: int | None = None
    blob_radius: float | None = None
    motions: list | None = None

    def to_dict(self) -> dict:
        return {
            "num_classes": self.num_classes,
            "clips_per_class": self.clips_per_class,
            "frame_count": self.frame_count,
            "width": self.width,
            "height": self.height,
            "seed": self.seed,
            "strokes_per_clip": self.strokes_per_clip,
            "videos": self.videos,
            "blob_radius": self.blob_radius,
            "motions": self.motions,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SyntheticSpec":
        return cls(**d)


@dataclass
class SyntheticVideo:
    name: str
    frames: np.ndarray          # (F,H,W,3) uint8
    poses: list                 # PoseFrame per frame
    annotations: VideoAnnotations


def _class_motion(k: int, num_classes: int) -> dict:
    # classes separate on direction, oscillation frequency, and reach
    angle = 2.0 * math.pi * k / num_classes
    return {"angle": angle, "reach": 0.80 - 0.08 * (k % 2), "osc_amp": 0.10,
            "osc_freq": 1.0 + (k % 3)}


_POSE_TEMPLATE = [
    (0.00, -1.00), (-0.10, -1.05), (0.10, -1.05), (-0.22, -1.00), (0.22, -1.00),
    (-0.40, -0.60), (0.40, -0.60), (-0.60, -0.25), (0.60, -0.25),
    (-0.65, 0.10), (0.65, 0.10), (-0.22, 0.00), (0.22, 0.00),
    (-0.28, 0.50), (0.28, 0.50), (-0.28, 1.00), (0.28, 1.00),
]


def _pose_for(cx: float, cy: float, scale: float) -> PersonPose:
    kps = tuple(Keypoint(cx + dx * scale, cy + dy * scale, 1.0)
                for dx, dy in _POSE_TEMPLATE)
    return PersonPose(keypoints=kps, score=1.0)


def _draw_blob(frame: np.ndarray, cx: float, cy: float, radius: float) -> None:
    h, w = frame.shape[:2]
    y0 = max(0, int(cy - radius) - 1)
    y1 = min(h, int(cy + radius) + 2)
    x0 = max(0, int(cx - radius) - 1)
    x1 = min(w, int(cx + radius) + 2)
    if y0 >= y1 or x0 >= x1:
        return
    ys, xs = np.mgrid[y0:y1, x0:x1]
    inside = (xs - cx) ** 2 + (ys - cy) ** 2 <= radius * radius
    frame[y0:y1, x0:x1][inside] = (255, 255, 255)




def _stroke_positions(center, motion, length, half_extent, rng):
    """Dash out along the class direction, dwell there wiggling, dash back.

    sin(pi*u)**0.25 rises steeply and plateaus, so the blob spends most of
    the stroke resident in its class quadrant while the trajectory still
    starts and ends at the rest position (smooth against idle frames).
    """
    angle = motion["angle"]
    dx, dy = math.cos(angle), math.sin(angle)
    px, py = -dy, dx
    reach = motion["reach"] * half_extent
    osc = motion["osc_amp"] * half_extent
    phase = float(rng.uniform(0, 2 * math.pi))
    pos = []
    for i in range(length):
        u = i / max(length - 1, 1)
        sweep = reach * math.sin(math.pi * u) ** 0.25
        wiggle = osc * math.sin(2 * math.pi * motion["osc_freq"] * u + phase)
        pos.append((center[0] + dx * sweep + px * wiggle,
                    center[1] + dy * sweep + py * wiggle))
    return pos


def _plan_strokes(spec: SyntheticSpec, rng) -> list:
    """Non-overlapping [begin,end) windows inside the clip."""
    n = spec.strokes_per_clip
    if n == 1 and spec.frame_count <= 2 * 16:
        return [(0, spec.frame_count)]
    min_len = max(8, spec.frame_count // (4 * n))
    max_len = max(min_len + 1, spec.frame_count // (2 * n))
    gap = max(4, min_len // 2)
    strokes = []
    cursor = 0
    for j in range(n):
        reserved = (n - j - 1) * (min_len + gap)   # room the rest still needs
        budget = spec.frame_count - cursor - reserved
        if budget < min_len:
            raise ValueError(
                f"frame_count {spec.frame_count} cannot host {n} strokes")
        length = int(rng.integers(min_len, min(max_len, budget) + 1))
        latest = spec.frame_count - reserved - length
        begin = int(rng.integers(cursor, latest + 1))
        strokes.append((begin, begin + length))
        cursor = begin + length + gap
    return strokes


def write_synthetic_dataset(spec: SyntheticSpec, out_dir) -> dict:
    """Generate and write the dataset tree plus a manifest listing every file.

    Layout per video: <name>/frames/frame_%06d.png, <name>/keypoints.jsonl,
    <name>/annotations.json; manifest.json sits at the root.
    """
    from .pose import write_keypoint_stream

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = []
    names = []
    for video in generate_synthetic(spec):
        vdir = out / video.name
        (vdir / "frames").mkdir(parents=True, exist_ok=True)
        for i in range(video.frames.shape[0]):
            rel = f"{video.name}/frames/{FRAME_PATTERN.format(i)}"
            Image.fromarray(video.frames[i]).save(out / rel)
            files.append(rel)
        write_keypoint_stream(vdir / "keypoints.jsonl", video.poses)
        files.append(f"{video.name}/keypoints.jsonl")
        save_annotations(vdir / "annotations.json", video.annotations)
        files.append(f"{video.name}/annotations.json")
        names.append(video.name)
    manifest = {"spec": spec.to_dict(), "videos": names, "files": sorted(files)}
    with open(out / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


def generate_synthetic(spec: SyntheticSpec) -> list:
    """Byte-deterministic synthetic videos: a bright blob resting at the
    frame center that sweeps along a class-specific direction during each
    stroke, with a 17-keypoint figure riding on it."""
    rng = np.random.default_rng(spec.seed)
    motions = spec.motions or [_class_motion(k, spec.num_classes)
                               for k in range(spec.num_classes)]
    half = 0.5 * min(spec.width, spec.height)
    radius = spec.blob_radius if spec.blob_radius is not None else 0.45 * half
    center = (spec.width / 2.0, spec.height / 2.0)
    pose_scale = 0.55 * half

    if spec.videos is None:
        plan = [(f"clip_{k:02d}_{i:03d}", None)
                for k in range(spec.num_classes)
                for i in range(spec.clips_per_class)]
        classes_of = {name: int(name.split("_")[1]) for name, _ in plan}
    else:
        plan = [(f"video_{i:03d}", None) for i in range(spec.videos)]
        classes_of = None

    videos = []
    for name, _ in plan:
        intervals = _plan_strokes(spec, rng)
        if classes_of is None:
            labels = [(j % spec.num_classes) for j in range(len(intervals))]
            rng.shuffle(labels)
        else:
            labels = [classes_of[name]] * len(intervals)
        jitter = (float(rng.uniform(-1.5, 1.5)), float(rng.uniform(-1.5, 1.5)))
        rest = (center[0] + jitter[0], center[1] + jitter[1])

        positions = [rest] * spec.frame_count
        strokes = []
        for (begin, end), label in zip(intervals, labels):
            path = _stroke_positions(rest, motions[label], end - begin, half, rng)
            positions[begin:end] = path
            strokes.append(StrokeAnnotation(begin, end, label))

        frames = np.zeros((spec.frame_count, spec.height, spec.width, 3),
                          dtype=np.uint8)
        poses = []
        for f, (cx, cy) in enumerate(positions):
            _draw_blob(frames[f], cx, cy, radius)
            poses.append(PoseFrame(f, (_pose_for(cx, cy, pose_scale),)))
        ann = VideoAnnotations(name, spec.frame_count,
                               _validate_strokes(strokes, spec.frame_count))
        videos.append(SyntheticVideo(name, frames, poses, ann))
    return videos
