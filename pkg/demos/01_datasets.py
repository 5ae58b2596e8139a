"""
Synthetic video datasets
========================

Two toy families stand in for real video corpora:

* ``orbit``  -- an 8-dimensional state rotating in coordinate planes with a
  little process noise.  Smooth, well-posed dynamics: the frame determines
  its successor (up to the noise).
* ``bounce`` -- a Gaussian blob bouncing around a pixel grid.  The velocity
  direction is invisible in a single frame, so next-frame prediction is
  ambiguous on purpose; this is the dataset that makes drift visible.

Both are generated deterministically from a seed and stored in the BFV1
binary frame format.
"""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from biflow import gen_bounce, gen_orbit, read_frames, write_frames
from biflow.data import split_videos

out = Path(__file__).parent / "output"
out.mkdir(exist_ok=True)

###############################################################################
# Orbit: rotating states
# ----------------------

orbit = gen_orbit(n_videos=8, n_frames=60, dim=8, angular_speed=0.4, process_noise=0.01, seed=0)
video = orbit[0]
print(f"orbit video: {video.num_frames} frames of shape {video.frame_shape}")
print(f"value range: [{video.frames.min():.3f}, {video.frames.max():.3f}]")

fig, ax = plt.subplots(figsize=(5, 5))
for v in orbit[:4]:
    ax.plot(v.flat[:, 0], v.flat[:, 1], ".-", markersize=3, alpha=0.7)
ax.set_title("first coordinate plane of four orbit videos")
ax.set_aspect("equal")
fig.savefig(out / "orbit_planes.png", dpi=120)
plt.close(fig)

###############################################################################
# Bounce: a blob with hidden velocity
# -----------------------------------

bounce = gen_bounce(n_videos=8, n_frames=60, grid=(8, 8), blob_sigma=1.3, speed=1.0, seed=0)
video = bounce[0]
print(f"\nbounce video: {video.num_frames} frames of shape {video.frame_shape}")

fig, axes = plt.subplots(1, 8, figsize=(14, 2))
for i, ax in enumerate(axes):
    ax.imshow(video.frames[i * 3, 0], cmap="magma", vmin=-1, vmax=1)
    ax.set_title(f"t={i * 3}", fontsize=8)
    ax.axis("off")
fig.savefig(out / "bounce_frames.png", dpi=120)
plt.close(fig)

###############################################################################
# The consecutive-frame coupling
# ------------------------------
# Training never pairs arbitrary frames: every sample is (frame i, frame i+1)
# of one video.  The split keeps whole videos on one side.

train_ids, test_ids = split_videos(8, train_fraction=0.8, seed=0)
print(f"\nsplit over whole videos: train={train_ids} test={test_ids}")

###############################################################################
# Round-tripping the binary format
# --------------------------------

path = out / "sample.bfv"
write_frames(path, video)
back = read_frames(path)
print(f"\nwrote {path.stat().st_size} bytes; payload identical:",
      np.array_equal(back.frames.astype(np.float32), video.frames.astype(np.float32)))
