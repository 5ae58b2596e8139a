"""Training loop shared by the CLI and the experiments.

Per-iteration randomness is drawn from a generator seeded by
(training seed, iteration), so resuming from a checkpoint continues the
exact same stream as an uninterrupted run.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from . import nn, objectives
from .checkpoint import save_checkpoint
from .config import ExperimentConfig, config_hash
from .data import PairSampler, VideoTensor, sample_pairs
from .errors import ConfigurationError, TrainingError
from .fields import FieldModel, init_model


@dataclass
class TrainResult:
    model: FieldModel
    opt_state: nn.AdamState
    history: list[tuple[int, float]]  # (iteration, loss) at log points


def build_model(cfg: ExperimentConfig, frame_dim: int) -> FieldModel:
    m = cfg.model
    return init_model(
        m.loss,
        frame_dim,
        hidden_dims=m.hidden_dims,
        activation=m.activation,
        coord_embedding=m.coord_embedding,
        n_frequencies=m.n_frequencies,
        seed=m.init_seed,
    )


def _iteration_rng(seed: int, iteration: int) -> np.random.Generator:
    return np.random.default_rng([seed, iteration])


def loss_step(model: FieldModel, cfg: ExperimentConfig, x0, x1, rng):
    """One loss + gradient evaluation with per-sample coordinate draws."""
    batch = x0.shape[0]
    t = rng.uniform(0.0, 1.0, size=batch)
    if model.kind == "flow":
        return objectives.loss_video_flow(model, x0, x1, t)
    if model.kind == "biflow":
        alpha = rng.uniform(0.0, cfg.model.alpha_max, size=batch)
        noise = rng.standard_normal(x0.shape)
        weights = (cfg.model.v_weight, cfg.model.n_weight)
        return objectives.loss_biflow(model, x0, x1, noise, t, alpha, weights)
    z0 = rng.standard_normal(x0.shape)
    return objectives.loss_condiff(model, x0, x1, z0, t)


def train_model(
    cfg: ExperimentConfig,
    videos: list[VideoTensor],
    train_ids: list[int],
    out_dir=None,
    start_model: FieldModel | None = None,
    start_state: nn.AdamState | None = None,
    start_iteration: int = 0,
    dataset_id: str | None = None,
) -> TrainResult:
    """Train the configured loss on the train split.

    Checkpoints are written periodically when ``out_dir`` is given; a
    non-finite loss or gradient aborts with the last good checkpoint left
    on disk.
    """
    tr = cfg.training
    frame_dim = videos[train_ids[0]].frame_dim
    model = start_model if start_model is not None else build_model(cfg, frame_dim)
    if model.frame_dim != frame_dim:
        raise ConfigurationError(
            f"model frame_dim {model.frame_dim} does not match dataset frame_dim {frame_dim}"
        )
    state = start_state if start_state is not None else nn.adam_init(model.params.size)
    sampler = PairSampler(videos, train_ids, seed=tr.seed, split="train")
    history: list[tuple[int, float]] = []
    chash = config_hash(cfg)

    def metadata(iteration):
        return {
            "dataset_id": dataset_id or cfg.dataset.kind,
            "loss_kind": model.kind,
            "iterations_done": iteration,
            "train_seed": tr.seed,
            "config_hash": chash,
        }

    def write_ckpt(iteration, name="checkpoint.bfck"):
        if out_dir is not None:
            save_checkpoint(os.path.join(out_dir, name), model, state, metadata(iteration))

    for it in range(start_iteration, tr.iterations):
        rng = _iteration_rng(tr.seed, it)
        x0, x1 = sample_pairs(sampler, tr.batch_size, rng)
        if tr.lr_schedule == "cosine":
            lr = tr.learning_rate * 0.5 * (1.0 + np.cos(np.pi * it / max(tr.iterations, 1)))
        else:
            lr = tr.learning_rate
        try:
            loss, grads = loss_step(model, cfg, x0, x1, rng)
            model.params, state = nn.adam_step(
                model.params, grads, state, lr=lr, betas=(tr.beta1, tr.beta2), eps=tr.eps
            )
        except TrainingError as exc:
            exc.iteration = it
            raise TrainingError(f"iteration {it}: {exc}", iteration=it) from exc
        if it % tr.log_every == 0 or it == tr.iterations - 1:
            history.append((it, loss))
        if tr.checkpoint_every > 0 and (it + 1) % tr.checkpoint_every == 0 and it + 1 < tr.iterations:
            write_ckpt(it + 1, f"checkpoint_{it + 1:06d}.bfck")
    write_ckpt(tr.iterations)
    return TrainResult(model, state, history)


def target_variance(videos: list[VideoTensor], ids: list[int]) -> float:
    """Mean squared frame-to-frame displacement norm; a zero model's loss."""
    total, count = 0.0, 0
    for vid in ids:
        flat = videos[vid].flat
        diff = flat[1:] - flat[:-1]
        total += float(np.sum(diff * diff))
        count += diff.shape[0]
    return total / count
