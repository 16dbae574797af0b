"""Build the two-stream network and compare the three fusion modes.

Run:  python demos/03_two_stream_model.py
"""

import numpy as np

from strokenet.model import (
    CONCAT, SUMMED, WEIGHTED, ModelConfig, branch_forward, fuse_outputs,
    init_model, model_forward,
)
from strokenet.tensor import Tensor

# Full-scale configuration: five levels of (32,64,128,256,512) filters,
# pools (4x3x2),(4x3x2),(2x2x2)x3 over a 120x120x100 input.
full = ModelConfig()
print("full-scale flattened feature length:", full.feature_length())
print("extents (T,H,W) after each pool:", full.level_extents())

# A desk-sized model we can actually run here.
cfg = ModelConfig(filters=(4, 8, 8, 16, 16),
                  pool_sizes=((2, 2, 2),) * 5,
                  input_size=(32, 32, 16, 3),
                  hidden_dim=64, num_classes=4, streams=2)
net = init_model(cfg, seed=42)
print("parameters:", sum(p.value.size for p in net.parameters()))

rng = np.random.default_rng(1)
clip_rgb = Tensor(rng.random((2, 3, 16, 32, 32)).astype(np.float32))
clip_pose = Tensor(rng.random((2, 3, 16, 32, 32)).astype(np.float32))

probs = model_forward(net, clip_rgb, clip_pose)
print("fused probabilities (summed):")
print(np.round(probs.data, 4), "row sums", probs.data.sum(axis=1))

# The same per-branch outputs through each fusion rule.
pa = branch_forward(net, net.branch_a, clip_rgb)
pb = branch_forward(net, net.branch_b, clip_pose)
summed = fuse_outputs(pa, pb, SUMMED)
weighted = fuse_outputs(pa, pb, WEIGHTED, weights=(1.0, 1.0))
print("weighted(1,1) == summed bitwise:",
      bool((summed.data == weighted.data).all()))

w = Tensor(rng.standard_normal((4, 8)).astype(np.float32) * 0.3)
b = Tensor(np.zeros(4, dtype=np.float32))
concat = fuse_outputs(pa, pb, CONCAT, fusion_w=w, fusion_b=b)
print("concat fusion rows sum to",  concat.data.sum(axis=1))
