"""End to end at toy scale: synthesize clips, train briefly, classify one.

Run:  python demos/04_train_and_classify.py [work_dir]
A few dozen epochs on a 2-class toy set; takes a couple of minutes.
"""

import sys
import tempfile
from pathlib import Path

import numpy as np

from strokenet.data import SyntheticSpec, write_synthetic_dataset
from strokenet.decision import DecisionMethod
from strokenet.model import ModelConfig, load_checkpoint
from strokenet.optim import OptimizerConfig
from strokenet.training import RunConfig, classify_clip, load_video, train

work = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(tempfile.mkdtemp())
data_dir = work / "data"
run_dir = work / "run"

spec = SyntheticSpec(num_classes=2, clips_per_class=12, frame_count=16,
                     width=32, height=32, seed=5)
write_synthetic_dataset(spec, data_dir)
print("dataset at", data_dir)

run = RunConfig(
    model=ModelConfig(filters=(4, 8, 8, 16, 16),
                      pool_sizes=((2, 2, 2), (2, 2, 2), (2, 2, 2),
                                  (1, 1, 2), (1, 1, 2)),
                      input_size=(32, 32, 16, 3), hidden_dim=2048,
                      num_classes=2, streams=2, bias_init=0.2),
    optimizer=OptimizerConfig(learning_rate=1e-4, momentum=0.5, epochs=120),
    data_dir=str(data_dir), out_dir=str(run_dir),
    streams=("rgb", "pose"), task="classify", seed=3, batch_size=8,
    stop_at_accuracy=0.95,
    decision=DecisionMethod("mean", stride=4))

summary = train(run, progress=lambda row: print(
    f"epoch {row['epoch']:3d}  loss {row['loss']:.4f}  acc {row['accuracy']:.3f}")
    if row["epoch"] % 10 == 0 else None)
print(f"trained {summary['epochs_run']} epochs ->", summary["final_checkpoint"])

net = load_checkpoint(summary["final_checkpoint"])
clip_dir = data_dir / "clip_01_000"
video = load_video(clip_dir, run.streams)
probs, label, n = classify_clip(net, video, run)
truth = video.annotations.strokes[0].label
print(f"clip {clip_dir.name}: predicted {label} (truth {truth}) "
      f"probs {np.round(probs, 3)} over {n} windows")
