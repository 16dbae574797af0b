"""Temporal detection: plant strokes in a long video, detect, score.

Run:  python demos/05_detect_and_evaluate.py [work_dir]
Trains a small stroke/non-stroke model, slides it over the video with the
vote curve, extracts segments, and prints IoU and mAP against ground truth.
"""

import sys
import tempfile
from pathlib import Path

import numpy as np

from strokenet.data import SyntheticSpec, write_synthetic_dataset
from strokenet.decision import (
    DecisionMethod, Segment, map_score, matched_iou_stats,
)
from strokenet.model import ModelConfig, load_checkpoint
from strokenet.optim import OptimizerConfig
from strokenet.training import RunConfig, detect_video, load_video, train

work = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(tempfile.mkdtemp())
data_dir = work / "video"

spec = SyntheticSpec(num_classes=4, frame_count=900, width=32, height=32,
                     seed=21, strokes_per_clip=6, videos=1)
write_synthetic_dataset(spec, data_dir)

# a livelier learning rate than the full-scale default keeps the demo short
run = RunConfig(
    model=ModelConfig(filters=(4, 8, 8, 16, 16),
                      pool_sizes=((2, 2, 2), (2, 2, 2), (2, 2, 2),
                                  (1, 1, 2), (1, 1, 2)),
                      input_size=(32, 32, 16, 3), hidden_dim=2048,
                      num_classes=2, streams=2, bias_init=0.2),
    optimizer=OptimizerConfig(learning_rate=2e-3, momentum=0.5, epochs=150),
    data_dir=str(data_dir), out_dir=str(work / "run"),
    streams=("rgb", "pose"), task="detect", seed=9, batch_size=8,
    stop_at_accuracy=0.98,
    decision=DecisionMethod("vote-sliding", stride=4),
    threshold=0.5, min_length=2)

summary = train(run, progress=lambda row: print(
    f"epoch {row['epoch']:3d}  loss {row['loss']:.4f}  acc {row['accuracy']:.3f}")
    if row["epoch"] % 20 == 0 else None)
net = load_checkpoint(summary["final_checkpoint"])

video = load_video(next(data_dir.glob("video_*")), run.streams)
segments, curve, n_windows = detect_video(net, video, run)
truth = [Segment(s.begin, s.end, 1) for s in video.annotations.strokes]
print(f"\n{n_windows} windows -> {len(segments)} segments "
      f"(truth has {len(truth)})")
for seg in segments:
    print(f"  [{seg.begin:4d},{seg.end:4d}) score {seg.score:.2f}")

mean_iou, iou_over_gt = matched_iou_stats(segments, truth, 0.5)
mean_ap, per_thr = map_score(segments, truth)
print(f"mean matched IoU {mean_iou:.3f}  (over all GT {iou_over_gt:.3f})")
print(f"mAP {mean_ap:.3f}  AP@0.50 {per_thr[0.5]:.3f}")
