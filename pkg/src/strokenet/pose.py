"""Skeleton rendering: keypoint streams to Pose / pose-over-RGB frames.

Keypoints arrive in COCO 17-point order from a JSON Lines stream (one
object per frame); upstream person detection and pose estimation are not
part of this package. Rendering is integer midpoint (Bresenham) line
drawing with square thickness stamps and Euclidean keypoint discs, no
anti-aliasing, so identical inputs give byte-identical images.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

BLACK = "black"
OVERLAY = "overlay"

COCO_KEYPOINT_NAMES = [
    "nose", "left_eye", "right_eye", "left_ear", "right_ear",
    "left_shoulder", "right_shoulder", "left_elbow", "right_elbow",
    "left_wrist", "right_wrist", "left_hip", "right_hip",
    "left_knee", "right_knee", "left_ankle", "right_ankle",
]

# one color per limb group: head, torso, left/right arm, left/right leg
LIMB_COLORS = {
    "head": (255, 255, 0),
    "torso": (0, 255, 0),
    "left_arm": (255, 0, 0),
    "right_arm": (255, 128, 0),
    "left_leg": (0, 0, 255),
    "right_leg": (0, 255, 255),
}

COCO_EDGES = [
    ((0, 1), LIMB_COLORS["head"]),
    ((0, 2), LIMB_COLORS["head"]),
    ((1, 3), LIMB_COLORS["head"]),
    ((2, 4), LIMB_COLORS["head"]),
    ((5, 6), LIMB_COLORS["torso"]),
    ((5, 11), LIMB_COLORS["torso"]),
    ((6, 12), LIMB_COLORS["torso"]),
    ((11, 12), LIMB_COLORS["torso"]),
    ((5, 7), LIMB_COLORS["left_arm"]),
    ((7, 9), LIMB_COLORS["left_arm"]),
    ((6, 8), LIMB_COLORS["right_arm"]),
    ((8, 10), LIMB_COLORS["right_arm"]),
    ((11, 13), LIMB_COLORS["left_leg"]),
    ((13, 15), LIMB_COLORS["left_leg"]),
    ((12, 14), LIMB_COLORS["right_leg"]),
    ((14, 16), LIMB_COLORS["right_leg"]),
]


@dataclass(frozen=True)
class Keypoint:
    x: float
    y: float
    confidence: float

    def __post_init__(self):
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"keypoint confidence {self.confidence} outside [0,1]")


@dataclass(frozen=True)
class PersonPose:
    keypoints: tuple
    score: float

    def __post_init__(self):
        if len(self.keypoints) != 17:
            raise ValueError(f"a person needs exactly 17 keypoints, got {len(self.keypoints)}")
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"person score {self.score} outside [0,1]")


@dataclass(frozen=True)
class PoseFrame:
    frame_index: int
    persons: tuple = ()

    def __post_init__(self):
        if self.frame_index < 0:
            raise ValueError(f"negative frame index {self.frame_index}")


@dataclass
class SkeletonSpec:
    """Drawing parameters; all indices must stay below 17."""
    edges: list = field(default_factory=lambda: list(COCO_EDGES))
    keypoint_radius: int = 2
    line_thickness: int = 2
    confidence_threshold: float = 0.3   # per-keypoint
    person_threshold: float = 0.5       # per detected person
    keypoint_color: tuple = (255, 255, 255)

    def __post_init__(self):
        for (i, j), _ in self.edges:
            if not (0 <= i < 17 and 0 <= j < 17):
                raise ValueError(f"edge ({i},{j}) indexes past the 17 keypoints")
        if self.line_thickness < 1 or self.keypoint_radius < 0:
            raise ValueError("line_thickness must be >= 1 and keypoint_radius >= 0")

    def palette(self):
        return {color for _, color in self.edges} | {tuple(self.keypoint_color)}


# ---------------------------------------------------------------------------
# keypoint stream I/O (JSON Lines, one object per frame)

def _parse_person(obj, where):
    kps = obj.get("keypoints")
    if not isinstance(kps, list) or len(kps) != 17:
        n = len(kps) if isinstance(kps, list) else "missing"
        raise ValueError(f"{where}: keypoint list must have 17 entries, got {n}")
    try:
        keypoints = tuple(Keypoint(float(x), float(y), float(c)) for x, y, c in kps)
        return PersonPose(keypoints=keypoints, score=float(obj.get("score", 1.0)))
    except (TypeError, ValueError) as exc:
        raise ValueError(f"{where}: {exc}") from exc


def parse_keypoint_stream(path) -> list[PoseFrame]:
    """Read PoseFrames in ascending frame order, synthesizing empty frames
    for gaps between 0 and the highest frame index present."""
    by_index: dict[int, PoseFrame] = {}
    with open(Path(path), "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            where = f"line {lineno}"
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{where}: malformed JSON ({exc.msg})") from exc
            if "frame" not in obj:
                raise ValueError(f"{where}: missing 'frame' field")
            idx = obj["frame"]
            if not isinstance(idx, int) or idx < 0:
                raise ValueError(f"{where}: frame index {idx!r} must be a nonnegative integer")
            if idx in by_index:
                raise ValueError(f"{where}: duplicate frame index {idx}")
            persons = tuple(_parse_person(p, where) for p in obj.get("persons", []))
            by_index[idx] = PoseFrame(frame_index=idx, persons=persons)
    if not by_index:
        return []
    top = max(by_index)
    return [by_index.get(i, PoseFrame(frame_index=i)) for i in range(top + 1)]


def write_keypoint_stream(path, frames) -> None:
    with open(Path(path), "w", encoding="utf-8") as fh:
        for frame in frames:
            persons = [{
                "score": p.score,
                "keypoints": [[kp.x, kp.y, kp.confidence] for kp in p.keypoints],
            } for p in frame.persons]
            fh.write(json.dumps({"frame": frame.frame_index, "persons": persons},
                                sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# drawing primitives (in-place on a uint8 H x W x 3 canvas)

def _px(value: float) -> int:
    return int(math.floor(value + 0.5))


def _stamp(canvas, x, y, offsets, color):
    h, w = canvas.shape[:2]
    for dy in offsets:
        yy = y + dy
        if not 0 <= yy < h:
            continue
        for dx in offsets:
            xx = x + dx
            if 0 <= xx < w:
                canvas[yy, xx] = color


def draw_line(canvas, x0, y0, x1, y1, color, thickness=1) -> None:
    """Integer midpoint line with a thickness x thickness square stamp."""
    offsets = range(-(thickness // 2), thickness - thickness // 2)
    dx, dy = abs(x1 - x0), -abs(y1 - y0)
    sx = 1 if x0 < x1 else -1
    sy = 1 if y0 < y1 else -1
    err = dx + dy
    x, y = x0, y0
    while True:
        _stamp(canvas, x, y, offsets, color)
        if x == x1 and y == y1:
            break
        e2 = 2 * err
        if e2 >= dy:
            err += dy
            x += sx
        if e2 <= dx:
            err += dx
            y += sy


def draw_disc(canvas, cx, cy, radius, color) -> None:
    h, w = canvas.shape[:2]
    r2 = radius * radius
    for dy in range(-radius, radius + 1):
        yy = cy + dy
        if not 0 <= yy < h:
            continue
        for dx in range(-radius, radius + 1):
            if dx * dx + dy * dy > r2:
                continue
            xx = cx + dx
            if 0 <= xx < w:
                canvas[yy, xx] = color


def rasterize_skeleton(canvas: np.ndarray, persons, spec: SkeletonSpec) -> np.ndarray:
    """Draw every person with score >= person_threshold onto a copy of canvas.

    An edge is drawn only when both endpoints reach the keypoint confidence
    threshold; keypoint discs follow the same per-keypoint rule. Later
    persons overdraw earlier ones. Out-of-frame geometry is clipped.
    """
    if canvas.ndim != 3 or canvas.shape[2] != 3:
        raise ValueError(f"canvas must be HxWx3, got {canvas.shape}")
    out = canvas.copy()
    thr = spec.confidence_threshold
    for person in persons:
        if person.score < spec.person_threshold:
            continue
        kps = person.keypoints
        for (i, j), color in spec.edges:
            a, b = kps[i], kps[j]
            if a.confidence < thr or b.confidence < thr:
                continue
            draw_line(out, _px(a.x), _px(a.y), _px(b.x), _px(b.y),
                      color, spec.line_thickness)
        for kp in kps:
            if kp.confidence < thr:
                continue
            draw_disc(out, _px(kp.x), _px(kp.y), spec.keypoint_radius,
                      spec.keypoint_color)
    return out


def compose_frame(mode: str, base: np.ndarray | None, poses: PoseFrame,
                  spec: SkeletonSpec, size: tuple[int, int] | None = None) -> np.ndarray:
    """Render one frame: BLACK starts from zeros, OVERLAY from a copy of base.

    size=(height, width) supplies the canvas dimensions in BLACK mode when
    no base frame is given.
    """
    if mode == OVERLAY:
        if base is None:
            raise ValueError("overlay mode needs a base frame")
        canvas = np.asarray(base, dtype=np.uint8)
    elif mode == BLACK:
        if base is not None:
            canvas = np.zeros(np.asarray(base).shape, dtype=np.uint8)
        elif size is not None:
            canvas = np.zeros((size[0], size[1], 3), dtype=np.uint8)
        else:
            raise ValueError("black mode needs either a base frame or an explicit size")
    else:
        raise ValueError(f"unknown compose mode {mode!r}")
    return rasterize_skeleton(canvas, poses.persons, spec)
