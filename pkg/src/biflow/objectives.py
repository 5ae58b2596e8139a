"""Training losses for the three methods.

All losses are mean-over-batch squared residual norms and return the loss
value together with the exact parameter gradient, computed in one forward
and one reverse sweep.  Per-sample draws (t, alpha, noise) are passed in
as arrays so the functions stay pure and testable by hand.
"""

from __future__ import annotations

import numpy as np

from . import nn
from .errors import ConfigurationError, TrainingError
from .fields import FieldModel


def bilinear_interp(x0, x1, noise, t, alpha) -> np.ndarray:
    """x0 + t * (x1 - x0) + alpha * noise, elementwise over the batch.

    ``t`` and ``alpha`` are scalars or per-row arrays broadcast over the
    frame dimension.
    """
    x0 = np.asarray(x0, dtype=np.float64)
    x1 = np.asarray(x1, dtype=np.float64)
    noise = np.asarray(noise, dtype=np.float64)
    if x0.shape != x1.shape or x0.shape != noise.shape:
        raise ConfigurationError(
            f"shape mismatch: x0 {x0.shape}, x1 {x1.shape}, noise {noise.shape}"
        )
    t = _per_row(t, x0)
    alpha = _per_row(alpha, x0)
    return x0 + t * (x1 - x0) + alpha * noise


def _per_row(c, ref: np.ndarray):
    c = np.asarray(c, dtype=np.float64)
    if c.ndim == 0 or ref.ndim == 1:
        return c
    return c[:, None]


def _batched(*arrays):
    out = [np.atleast_2d(np.asarray(a, dtype=np.float64)) for a in arrays]
    rows = out[0].shape[0]
    if any(a.shape[0] != rows for a in out):
        raise ConfigurationError("batch arrays must share the leading dimension")
    return out


def _check_finite(loss: float) -> float:
    if not np.isfinite(loss):
        raise TrainingError(f"loss is non-finite ({loss})")
    return float(loss)


def _value_and_grad(model: FieldModel, inp: np.ndarray, residual_fn):
    """Forward once, build the residual cotangent, backprop once."""
    out, cache = nn._forward_cached(model.net, model.params, inp)
    model.eval_count += inp.shape[0]
    loss, cot = residual_fn(out)
    grads, _ = nn._backprop(model.net, cache, cot)
    return _check_finite(loss), grads


def loss_flow_matching(model: FieldModel, x_src, x_tgt, t):
    """Plain flow matching: regress f(x_t, t) onto (x_tgt - x_src).

    ``x_src`` is drawn from the source (noise) distribution, ``x_tgt`` from
    the data; the loss is the batch mean of the squared residual norm.
    """
    if model.kind != "flow":
        raise ConfigurationError("flow matching trains a plain flow model")
    x_src, x_tgt = _batched(x_src, x_tgt)
    batch = x_src.shape[0]
    target = x_tgt - x_src
    x_t = bilinear_interp(x_src, x_tgt, np.zeros_like(x_src), t, 0.0)
    inp = model.net_input(x_t, t)

    def residual(out):
        r = out - target
        return np.sum(r * r) / batch, 2.0 * r / batch

    return _value_and_grad(model, inp, residual)


def loss_video_flow(model: FieldModel, x0, x1, t):
    """Flow matching over the consecutive-frame coupling (same form, paired data)."""
    if model.kind != "flow":
        raise ConfigurationError("video flow trains a plain flow model")
    return loss_flow_matching(model, x0, x1, t)


def loss_biflow(model: FieldModel, x0, x1, noise, t, alpha, weights=(1.0, 1.0)):
    """Joint objective on bilinear interpolants.

    The time branch regresses onto (x1 - x0) and the noise branch onto the
    injected noise; both are squared-norm terms weighted by ``weights``
    (1:1 by default) and averaged over the batch.
    """
    if model.kind != "biflow":
        raise ConfigurationError("the joint objective trains a biflow model")
    x0, x1, noise = _batched(x0, x1, noise)
    batch, d = x0.shape
    x_ta = bilinear_interp(x0, x1, noise, t, alpha)
    inp = model.net_input(x_ta, t, alpha)
    wv, wn = weights
    target_v = x1 - x0

    def residual(out):
        rv = out[:, :d] - target_v
        rn = out[:, d:] - noise
        loss = (wv * np.sum(rv * rv) + wn * np.sum(rn * rn)) / batch
        cot = np.concatenate([2.0 * wv * rv, 2.0 * wn * rn], axis=1) / batch
        return loss, cot

    return _value_and_grad(model, inp, residual)


def loss_condiff(model: FieldModel, x0, x1, z0, t):
    """Conditional baseline: solve from noise to the next frame given the last.

    The interpolant z_t = z0 + t * (x1 - z0) is concatenated with the clean
    condition frame x0; the model regresses onto (x1 - z0).
    """
    if model.kind != "condiff":
        raise ConfigurationError("the conditional objective trains a condiff model")
    x0, x1, z0 = _batched(x0, x1, z0)
    batch = x0.shape[0]
    target = x1 - z0
    z_t = bilinear_interp(z0, x1, np.zeros_like(z0), t, 0.0)
    inp = model.net_input(z_t, t, cond=x0)

    def residual(out):
        r = out - target
        return np.sum(r * r) / batch, 2.0 * r / batch

    return _value_and_grad(model, inp, residual)


def draw_batch_coords(rng: np.random.Generator, batch: int, alpha_max: float = 1.0):
    """Per-sample (t, alpha) draws: t ~ U(0,1), alpha ~ U(0, alpha_max)."""
    return rng.uniform(0.0, 1.0, size=batch), rng.uniform(0.0, alpha_max, size=batch)
