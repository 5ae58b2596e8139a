"""
The three training objectives
=============================

One network architecture, three losses:

* plain next-frame flow (``flow``): regress the displacement to the next
  frame on linear interpolants of consecutive pairs;
* the joint bilinear objective (``biflow``): interpolants get noise of a
  random magnitude added, and a two-branch field regresses both the
  displacement and the injected noise;
* the conditional baseline (``condiff``): map noise to the next frame
  with the previous frame concatenated as the condition.

Gradients come from a small hand-rolled reverse-mode pass over the dense
network, so this demo also checks one gradient against finite differences.
"""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from biflow import gen_orbit, loss_biflow
from biflow.config import parse_config
from biflow.data import split_videos
from biflow.fields import init_model
from biflow.train import train_model, target_variance

out = Path(__file__).parent / "output"
out.mkdir(exist_ok=True)

###############################################################################
# A gradient spot-check
# ---------------------

model = init_model("biflow", frame_dim=3, hidden_dims=(6, 5), n_frequencies=2, seed=0)
rng = np.random.default_rng(1)
x0, x1, noise = rng.standard_normal((3, 4, 3))
t, alpha = rng.uniform(size=4), rng.uniform(size=4)

loss, grads = loss_biflow(model, x0, x1, noise, t, alpha)
i = int(np.argmax(np.abs(grads)))
h = 1e-6
bumped = model.params.copy()
bumped[i] += h
model_hi = init_model("biflow", 3, hidden_dims=(6, 5), n_frequencies=2, seed=0)
model_hi.params = bumped
hi, _ = loss_biflow(model_hi, x0, x1, noise, t, alpha)
bumped[i] -= 2 * h
model_hi.params = bumped
lo, _ = loss_biflow(model_hi, x0, x1, noise, t, alpha)
fd = (hi - lo) / (2 * h)
print(f"loss {loss:.6f}; largest gradient coord {i}: autodiff {grads[i]:.8f} vs fd {fd:.8f}")

###############################################################################
# Training the joint objective on orbit data
# -------------------------------------------
# A short run at demo scale; the experiment configs train much longer.

cfg = parse_config(
    """
    dataset.kind = orbit
    dataset.n_videos = 32
    dataset.n_frames = 60
    model.loss = biflow
    model.hidden_dims = 64, 64
    training.iterations = 2000
    training.batch_size = 64
    training.checkpoint_every = 0
    training.log_every = 50
    """
)
videos = gen_orbit(32, 60, 8, seed=cfg.dataset.seed)
train_ids, _ = split_videos(32, 0.8, cfg.dataset.seed)
print(f"\nzero-model baseline loss (displacement variance): {target_variance(videos, train_ids):.4f}")

result = train_model(cfg, videos, train_ids)
iters = [it for it, _ in result.history]
losses = [l for _, l in result.history]
print(f"loss after {iters[-1] + 1} iterations: {losses[-1]:.4f}")

fig, ax = plt.subplots(figsize=(6, 4))
ax.plot(iters, losses)
ax.set_xlabel("iteration")
ax.set_ylabel("joint objective")
ax.set_yscale("log")
fig.savefig(out / "training_curve.png", dpi=120)
plt.close(fig)
print(f"wrote {out / 'training_curve.png'}")
