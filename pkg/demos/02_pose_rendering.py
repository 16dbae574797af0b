"""Render a COCO skeleton on black and over an RGB frame.

Run:  python demos/02_pose_rendering.py [out_dir]
Writes pose.png and prgb.png.
"""

import sys
from pathlib import Path

import numpy as np
from PIL import Image

from strokenet.pose import (
    BLACK, OVERLAY, Keypoint, PersonPose, PoseFrame, SkeletonSpec,
    compose_frame,
)

out_dir = Path(sys.argv[1] if len(sys.argv) > 1 else ".")

# A hand-placed standing figure (x, y) per COCO keypoint, all confident.
points = [
    (64, 20), (60, 16), (68, 16), (54, 18), (74, 18),    # head
    (46, 38), (82, 38),                                   # shoulders
    (38, 62), (92, 60),                                   # elbows
    (34, 84), (98, 80),                                   # wrists
    (52, 78), (76, 78),                                   # hips
    (50, 102), (78, 102),                                 # knees
    (48, 124), (80, 124),                                 # ankles
]
person = PersonPose(
    keypoints=tuple(Keypoint(float(x), float(y), 1.0) for x, y in points),
    score=1.0)
frame = PoseFrame(0, (person,))
spec = SkeletonSpec(line_thickness=2, keypoint_radius=2)

# Pose variant: skeleton on black.
pose_img = compose_frame(BLACK, None, frame, spec, size=(140, 128))
Image.fromarray(pose_img).save(out_dir / "pose.png")

# Pose-over-RGB variant: same skeleton on a synthetic "court" background.
rng = np.random.default_rng(0)
base = np.full((140, 128, 3), (20, 60, 110), dtype=np.uint8)
base[100:, :] = (130, 90, 40)
base += rng.integers(0, 12, base.shape).astype(np.uint8)
prgb_img = compose_frame(OVERLAY, base, frame, spec)
Image.fromarray(prgb_img).save(out_dir / "prgb.png")

drawn = int(np.any(pose_img != 0, axis=2).sum())
print(f"wrote pose.png and prgb.png ({drawn} skeleton pixels,"
      f" palette of {len(spec.palette())} colors)")
