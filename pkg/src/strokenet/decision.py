"""Window-probability aggregation and segment scoring.

Clip-level decisions aggregate overlapping window predictions four ways
(no-window, mean, gaussian, vote); detection builds a per-frame stroke
curve (sliding vote, mean, or gaussian), extracts threshold runs as
segments, and scores them with temporal IoU, AP and mAP.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

NO_WINDOW = "no-window"
MEAN = "mean"
GAUSSIAN = "gaussian"
VOTE = "vote"
VOTE_SLIDING = "vote-sliding"

CLIP_METHODS = (NO_WINDOW, MEAN, GAUSSIAN, VOTE)
CURVE_METHODS = (MEAN, GAUSSIAN, VOTE_SLIDING)

MAP_THRESHOLDS = tuple(round(0.50 + 0.05 * i, 2) for i in range(10))


@dataclass(frozen=True)
class WindowPrediction:
    start: int
    length: int
    probs: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=np.float64)
        object.__setattr__(self, "probs", p)
        if p.ndim != 1:
            raise ValueError(f"probs must be a vector, got shape {p.shape}")
        if abs(p.sum() - 1.0) > 1e-6 or (p < 0).any():
            raise ValueError("probs must be a distribution (sum 1 within 1e-6)")
        if self.length < 1:
            raise ValueError(f"window length must be >= 1, got {self.length}")

    @property
    def center(self) -> float:
        return self.start + self.length / 2.0


@dataclass(frozen=True)
class Segment:
    begin: int
    end: int
    label: int
    score: float = 1.0

    def __post_init__(self):
        if self.begin >= self.end:
            raise ValueError(f"segment [{self.begin},{self.end}) is empty")


@dataclass(frozen=True)
class DecisionMethod:
    variant: str
    sigma: float | None = None
    stride: int = 1

    def __post_init__(self):
        if self.variant not in CLIP_METHODS + (VOTE_SLIDING,):
            raise ValueError(f"unknown decision method {self.variant!r}")
        if self.sigma is not None and not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if self.stride < 1:
            raise ValueError(f"stride must be >= 1, got {self.stride}")


# ---------------------------------------------------------------------------
# clip-level aggregation

def aggregate_clip(preds, method: DecisionMethod, center: float | None = None):
    """Aggregate one clip's window predictions into (probs, label).

    no-window: the probs of the window whose center is nearest `center` (the
    stroke midpoint; defaults to the midpoint of the covered span). mean:
    uniform average then argmax. gaussian: average weighted by a normalized
    Gaussian of window-center distance to `center`, then argmax. vote:
    majority over per-window argmaxes (the returned vector holds vote
    shares), ties to the lowest class id.
    """
    preds = list(preds)
    if not preds:
        raise ValueError("aggregate_clip needs at least one window prediction")
    if center is None:
        lo = min(p.start for p in preds)
        hi = max(p.start + p.length for p in preds)
        center = (lo + hi) / 2.0
    k = len(preds[0].probs)

    if method.variant == NO_WINDOW:
        best = min(preds, key=lambda p: (abs(p.center - center), p.start))
        probs = best.probs.copy()
    elif method.variant == MEAN:
        probs = np.mean([p.probs for p in preds], axis=0)
    elif method.variant == GAUSSIAN:
        sigma = method.sigma if method.sigma is not None else \
            max(preds[0].length / 4.0, 1e-9)
        d = np.array([p.center - center for p in preds])
        weights = np.exp(-0.5 * (d / sigma) ** 2)
        weights /= weights.sum()
        probs = np.einsum("w,wk->k", weights, np.array([p.probs for p in preds]))
    elif method.variant == VOTE:
        counts = np.zeros(k)
        for p in preds:
            counts[int(np.argmax(p.probs))] += 1
        probs = counts / counts.sum()
    else:
        raise ValueError(f"{method.variant!r} does not aggregate a single clip")
    return probs, int(np.argmax(probs))   # argmax takes the lowest id on ties


# ---------------------------------------------------------------------------
# per-frame curves for detection

def vote_sliding_window(preds, num_frames: int, stroke_class: int = 1) -> np.ndarray:
    """Per-frame fraction of covering windows whose argmax is the stroke
    class; frames under no window get 0."""
    votes = np.zeros(num_frames)
    cover = np.zeros(num_frames)
    for p in preds:
        lo = max(p.start, 0)
        hi = min(p.start + p.length, num_frames)
        if lo >= hi:
            continue
        cover[lo:hi] += 1
        if int(np.argmax(p.probs)) == stroke_class:
            votes[lo:hi] += 1
    out = np.zeros(num_frames)
    covered = cover > 0
    out[covered] = votes[covered] / cover[covered]
    return out


def stroke_probability_curve(preds, num_frames: int, method: DecisionMethod,
                             stroke_class: int = 1) -> np.ndarray:
    """Per-frame stroke evidence in [0,1] under the chosen curve method.

    mean: average stroke probability of covering windows. gaussian: the same
    average weighted by exp(-d^2/2s^2) of window-center distance to the
    frame. vote-sliding: vote_sliding_window.
    """
    if method.variant == VOTE_SLIDING:
        return vote_sliding_window(preds, num_frames, stroke_class)
    if method.variant not in (MEAN, GAUSSIAN):
        raise ValueError(f"{method.variant!r} does not define a per-frame curve")
    num = np.zeros(num_frames)
    den = np.zeros(num_frames)
    for p in preds:
        lo = max(p.start, 0)
        hi = min(p.start + p.length, num_frames)
        if lo >= hi:
            continue
        prob = p.probs[stroke_class]
        if method.variant == MEAN:
            w = np.ones(hi - lo)
        else:
            sigma = method.sigma if method.sigma is not None else \
                max(p.length / 4.0, 1e-9)
            d = np.arange(lo, hi) + 0.5 - p.center
            w = np.exp(-0.5 * (d / sigma) ** 2)
        num[lo:hi] += w * prob
        den[lo:hi] += w
    out = np.zeros(num_frames)
    covered = den > 0
    out[covered] = num[covered] / den[covered]
    return out


def extract_segments(curve, threshold: float, min_length: int,
                     label: int = 1) -> list:
    """Maximal runs with curve >= threshold, dropping runs shorter than
    min_length; a segment scores the mean curve value over its run."""
    if not 0.0 < threshold < 1.0:
        raise ValueError(f"threshold must lie in (0,1), got {threshold}")
    if min_length < 1:
        raise ValueError(f"min_length must be >= 1, got {min_length}")
    curve = np.asarray(curve, dtype=np.float64)
    above = curve >= threshold
    segments = []
    start = None
    for i, flag in enumerate(above):
        if flag and start is None:
            start = i
        elif not flag and start is not None:
            if i - start >= min_length:
                segments.append(Segment(start, i, label,
                                        float(curve[start:i].mean())))
            start = None
    if start is not None and len(curve) - start >= min_length:
        segments.append(Segment(start, len(curve), label,
                                float(curve[start:].mean())))
    return segments


# ---------------------------------------------------------------------------
# metrics

def temporal_iou(a: Segment, b: Segment) -> float:
    inter = max(0, min(a.end, b.end) - max(a.begin, b.begin))
    union = (a.end - a.begin) + (b.end - b.begin) - inter
    return inter / union if union else 0.0


def match_segments(preds, gts, iou_threshold: float):
    """Greedy matching in descending score order (ties by begin frame);
    each prediction takes the unmatched GT with the highest IoU >= threshold.
    Returns (matches as list of (pred_idx, gt_idx, iou), tp flags per pred
    in that score order, the order itself)."""
    order = sorted(range(len(preds)),
                   key=lambda i: (-preds[i].score, preds[i].begin))
    taken = [False] * len(gts)
    matches = []
    flags = []
    for i in order:
        best_j, best_iou = -1, 0.0
        for j, gt in enumerate(gts):
            if taken[j]:
                continue
            iou = temporal_iou(preds[i], gt)
            if iou >= iou_threshold and iou > best_iou:
                best_j, best_iou = j, iou
        if best_j >= 0:
            taken[best_j] = True
            matches.append((i, best_j, best_iou))
            flags.append(True)
        else:
            flags.append(False)
    return matches, flags, order


def average_precision(preds, gts, iou_threshold: float) -> float:
    """Area under the envelope-interpolated precision-recall curve.

    Empty GT: 1.0 when there are no predictions either, otherwise 0.0.
    """
    if not gts:
        return 1.0 if not preds else 0.0
    if not preds:
        return 0.0
    _, flags, _ = match_segments(preds, gts, iou_threshold)
    tp = np.cumsum([1.0 if f else 0.0 for f in flags])
    fp = np.cumsum([0.0 if f else 1.0 for f in flags])
    recall = tp / len(gts)
    precision = tp / (tp + fp)
    # envelope from the right, area at recall change points
    mrec = np.concatenate([[0.0], recall, [1.0]])
    mpre = np.concatenate([[0.0], precision, [0.0]])
    for i in range(len(mpre) - 2, -1, -1):
        mpre[i] = max(mpre[i], mpre[i + 1])
    changed = np.where(mrec[1:] != mrec[:-1])[0] + 1
    return float(((mrec[changed] - mrec[changed - 1]) * mpre[changed]).sum())


def map_score(preds, gts, iou_thresholds=MAP_THRESHOLDS,
              classwise: bool = False):
    """Mean AP over IoU thresholds (and over classes when classwise).

    Returns (mAP, {threshold: AP averaged over classes}).
    """
    if classwise:
        labels = sorted({s.label for s in gts} | {s.label for s in preds})
        if not labels:
            labels = [None]
    else:
        labels = [None]
    per_threshold = {}
    for thr in iou_thresholds:
        aps = []
        for label in labels:
            if label is None:
                p, g = preds, gts
            else:
                p = [s for s in preds if s.label == label]
                g = [s for s in gts if s.label == label]
            aps.append(average_precision(p, g, thr))
        per_threshold[thr] = float(np.mean(aps))
    return float(np.mean(list(per_threshold.values()))), per_threshold


def matched_iou_stats(preds, gts, iou_threshold: float = 0.5):
    """Mean IoU of matched pairs, and the same mean spread over every GT
    (unmatched ground truth counting as 0)."""
    matches, _, _ = match_segments(preds, gts, iou_threshold)
    ious = [m[2] for m in matches]
    mean_matched = float(np.mean(ious)) if ious else 0.0
    mean_over_gt = float(np.sum(ious) / len(gts)) if gts else 0.0
    return mean_matched, mean_over_gt


def classification_metrics(pred_labels, true_labels, num_classes: int):
    """Accuracy plus a (true, predicted) confusion matrix."""
    pred = np.asarray(pred_labels)
    true = np.asarray(true_labels)
    if pred.shape != true.shape:
        raise ValueError(f"label lists differ in length: {pred.shape} vs {true.shape}")
    confusion = np.zeros((num_classes, num_classes), dtype=np.int64)
    for t, p in zip(true, pred):
        confusion[int(t), int(p)] += 1
    accuracy = float((pred == true).mean()) if pred.size else 0.0
    return accuracy, confusion
