"""Rollout quality and cost: sliding-window Frechet distance, drift slope,
steps-per-frame aggregation.

Features are deliberately cheap stand-ins for a learned embedding: orbit
states are their own features; bounce frames go through a fixed seeded
random projection plus mean / variance / edge-energy summaries.  The
projection seed and version are module constants so metric values stay
comparable across runs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import VideoTensor
from .errors import ConfigurationError

FEATURE_VERSION = 1
PROJECTION_SEED = 7151
PROJECTION_DIM = 32

_projection_cache: dict[int, np.ndarray] = {}


def _projection(frame_dim: int) -> np.ndarray:
    if frame_dim not in _projection_cache:
        rng = np.random.default_rng([PROJECTION_SEED, FEATURE_VERSION, frame_dim])
        _projection_cache[frame_dim] = rng.standard_normal(
            (frame_dim, PROJECTION_DIM)
        ) / np.sqrt(frame_dim)
    return _projection_cache[frame_dim]


def features(frames, dataset_kind: str, frame_shape=None) -> np.ndarray:
    """Per-frame feature vectors; input is (frame_dim,) or (n, frame_dim).

    orbit frames are returned as-is.  bounce frames need ``frame_shape``
    (channels, height, width) to compute the edge-energy summary.
    """
    x = np.atleast_2d(np.asarray(frames, dtype=np.float64))
    if dataset_kind == "orbit":
        out = x.copy()
    elif dataset_kind == "bounce":
        if frame_shape is None:
            raise ConfigurationError("bounce features need the frame shape")
        c, h, w = frame_shape
        if x.shape[1] != c * h * w:
            raise ConfigurationError(
                f"frame width {x.shape[1]} does not match shape {frame_shape}"
            )
        proj = x @ _projection(x.shape[1])
        imgs = x.reshape(-1, c, h, w)
        dh = np.diff(imgs, axis=2)
        dw = np.diff(imgs, axis=3)
        edge = (dh * dh).reshape(len(x), -1).mean(axis=1) + (dw * dw).reshape(
            len(x), -1
        ).mean(axis=1)
        summary = np.stack([x.mean(axis=1), x.var(axis=1), edge], axis=1)
        out = np.concatenate([proj, summary], axis=1)
    else:
        raise ConfigurationError(f"unknown dataset kind {dataset_kind!r}")
    if np.asarray(frames).ndim == 1:
        return out[0]
    return out


@dataclass
class GaussianStats:
    """Mean and covariance of a feature cloud."""

    mean: np.ndarray
    cov: np.ndarray

    @property
    def dim(self) -> int:
        return self.mean.size


def gaussian_stats(feature_rows: np.ndarray) -> GaussianStats:
    f = np.atleast_2d(np.asarray(feature_rows, dtype=np.float64))
    if f.shape[0] < 2:
        raise ConfigurationError("need at least 2 feature rows for covariance")
    mean = f.mean(axis=0)
    cov = np.cov(f, rowvar=False)
    cov = np.atleast_2d(cov)
    cov = 0.5 * (cov + cov.T)
    return GaussianStats(mean, cov)


def _sqrt_psd(mat: np.ndarray) -> np.ndarray:
    """Symmetric PSD square root via eigendecomposition, negatives clamped."""
    vals, vecs = np.linalg.eigh(0.5 * (mat + mat.T))
    vals = np.clip(vals, 0.0, None)
    return (vecs * np.sqrt(vals)) @ vecs.T


def frechet_distance(a: GaussianStats, b: GaussianStats) -> float:
    """||mu_a - mu_b||^2 + tr(S_a + S_b - 2 (S_a S_b)^{1/2}).

    The cross trace uses tr((A^{1/2} B A^{1/2})^{1/2}), the symmetrized
    form of the product square root, so only symmetric eigendecompositions
    are involved and rank-deficient covariances stay finite.
    """
    if a.dim != b.dim:
        raise ConfigurationError(f"stats dims differ: {a.dim} vs {b.dim}")
    sa = _sqrt_psd(a.cov)
    inner = sa @ b.cov @ sa
    vals = np.linalg.eigvalsh(0.5 * (inner + inner.T))
    cross = np.sum(np.sqrt(np.clip(vals, 0.0, None)))
    dmu = a.mean - b.mean
    d2 = float(dmu @ dmu + np.trace(a.cov) + np.trace(b.cov) - 2.0 * cross)
    return max(d2, 0.0)


@dataclass
class FrechetWindowSeries:
    """Windowed distances: one (window start, value) pair per position."""

    window: int
    stride: int
    values: list[tuple[int, float]]

    @property
    def starts(self) -> np.ndarray:
        return np.array([s for s, _ in self.values], dtype=np.float64)

    @property
    def distances(self) -> np.ndarray:
        return np.array([v for _, v in self.values], dtype=np.float64)

    @property
    def mean_distance(self) -> float:
        return float(self.distances.mean())


def _rollout_frames(r) -> np.ndarray:
    if isinstance(r, np.ndarray):
        return np.atleast_2d(r)
    if isinstance(r, VideoTensor):
        return r.flat
    frames = getattr(r, "frames", None)
    if isinstance(frames, VideoTensor):
        return frames.flat
    raise ConfigurationError(f"cannot extract frames from {type(r).__name__}")


def reference_stats(reference, dataset_kind: str, frame_shape=None) -> GaussianStats:
    """Gaussian statistics of every frame in a collection of test videos."""
    rows = np.concatenate([_rollout_frames(v) for v in reference], axis=0)
    return gaussian_stats(features(rows, dataset_kind, frame_shape))


def sliding_fvd(
    rollouts,
    reference,
    window: int = 32,
    stride: int = 16,
    dataset_kind: str = "orbit",
    frame_shape=None,
    ref_stats: GaussianStats | None = None,
) -> FrechetWindowSeries:
    """Frechet distance per sliding window position, pooled across rollouts.

    Each window pools the features of all rollout frames with index in
    [start, start + window) and compares them to the statistics of the
    whole reference set.  ``reference`` may be None when ``ref_stats`` is
    given precomputed.
    """
    if window <= 0 or stride <= 0:
        raise ConfigurationError("window and stride must be positive")
    if not rollouts:
        raise ConfigurationError("no rollouts to evaluate")
    mats = [_rollout_frames(r) for r in rollouts]
    longest = max(m.shape[0] for m in mats)
    if longest < window:
        raise ConfigurationError(
            f"rollouts have {longest} frames, shorter than the window {window}"
        )
    if ref_stats is None:
        ref_stats = reference_stats(reference, dataset_kind, frame_shape)
    feats = [features(m, dataset_kind, frame_shape) for m in mats]
    values = []
    for start in range(0, longest - window + 1, stride):
        # rollouts that diverged before covering this window drop out of it
        covering = [f[start : start + window] for f in feats if f.shape[0] >= start + window]
        if not covering:
            break
        stats = gaussian_stats(np.concatenate(covering, axis=0))
        values.append((start, frechet_distance(stats, ref_stats)))
    return FrechetWindowSeries(window, stride, values)


def drift_slope(series: FrechetWindowSeries) -> tuple[float, float]:
    """Ordinary least squares of distance against window start index."""
    if len(series.values) < 2:
        raise ConfigurationError("need at least 2 window positions to fit a trend")
    slope, intercept = np.polyfit(series.starts, series.distances, 1)
    return float(slope), float(intercept)


def aggregate_steps(rollouts) -> float:
    """Mean field evaluations per generated frame over all rollouts."""
    counts = []
    for r in rollouts:
        counts.extend(r.per_frame_steps if hasattr(r, "per_frame_steps") else r)
    return float(np.mean(counts))
