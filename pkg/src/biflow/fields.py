"""Learned field models: the thin layer between raw networks and samplers.

A `FieldModel` bundles a network spec, its flat parameter vector and the
model kind, and knows how to assemble network inputs from frames and the
scalar coordinates.  Three kinds exist:

* ``flow``    -- one branch, input [frame; emb(t)], output d/dt of the frame
* ``biflow``  -- joint field, input [frame; emb(t); emb(alpha)], output
                 stacked [time branch; noise branch], each frame-sized
* ``condiff`` -- conditional baseline, input [state; condition frame; emb(t)],
                 output d/dt of the state
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import nn
from .errors import ConfigurationError

MODEL_KINDS = ("flow", "biflow", "condiff")


def build_net_spec(
    kind: str,
    frame_dim: int,
    hidden_dims=(256, 256, 256),
    activation: str = "silu",
    coord_embedding: str = "sinusoidal",
    n_frequencies: int = 4,
) -> nn.NetSpec:
    """Network spec for a model kind; input/output widths follow the kind."""
    if kind not in MODEL_KINDS:
        raise ConfigurationError(f"unknown model kind {kind!r}")
    probe = nn.NetSpec(1, (1,), 1, "silu", coord_embedding, n_frequencies)
    e = nn.embedding_dim(probe)
    if kind == "flow":
        input_dim, output_dim = frame_dim + e, frame_dim
    elif kind == "biflow":
        input_dim, output_dim = frame_dim + 2 * e, 2 * frame_dim
    else:
        input_dim, output_dim = 2 * frame_dim + e, frame_dim
    return nn.NetSpec(
        input_dim, tuple(hidden_dims), output_dim, activation, coord_embedding, n_frequencies
    )


@dataclass
class FieldModel:
    kind: str
    frame_dim: int
    net: nn.NetSpec
    params: np.ndarray
    eval_count: int = field(default=0, compare=False)  # rows seen, instrumentation only

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise ConfigurationError(f"unknown model kind {self.kind!r}")
        expected = build_net_spec(
            self.kind,
            self.frame_dim,
            self.net.hidden_dims,
            self.net.activation,
            self.net.coord_embedding,
            self.net.n_frequencies,
        )
        if (expected.input_dim, expected.output_dim) != (self.net.input_dim, self.net.output_dim):
            raise ConfigurationError(
                f"{self.kind} model with frame_dim {self.frame_dim} needs net "
                f"{expected.input_dim}->{expected.output_dim}, got "
                f"{self.net.input_dim}->{self.net.output_dim}"
            )
        self.params = np.asarray(self.params, dtype=np.float64)

    def _run(self, inp: np.ndarray) -> np.ndarray:
        self.eval_count += 1 if inp.ndim == 1 else inp.shape[0]
        return nn.forward(self.net, self.params, inp)

    def _coords(self, x: np.ndarray, *cs) -> np.ndarray:
        """Append the embedding of each scalar coordinate to x (broadcast over rows)."""
        parts = [x]
        for c in cs:
            e = nn.embed_coord(self.net, np.asarray(c, dtype=np.float64))
            if x.ndim == 2 and e.ndim == 1:
                e = np.broadcast_to(e, (x.shape[0], e.shape[0]))
            parts.append(e)
        return np.concatenate(parts, axis=-1)

    def net_input(self, x, t, alpha=None, cond=None) -> np.ndarray:
        """Assemble the raw network input for this model kind."""
        x = np.asarray(x, dtype=np.float64)
        if self.kind == "flow":
            return self._coords(x, t)
        if self.kind == "biflow":
            a = 0.0 if alpha is None else alpha
            return self._coords(x, t, a)
        if cond is None:
            raise ConfigurationError("condiff model needs a condition frame")
        cond = np.asarray(cond, dtype=np.float64)
        if x.ndim == 2 and cond.ndim == 1:
            cond = np.broadcast_to(cond, x.shape)
        return self._coords(np.concatenate([x, cond], axis=-1), t)

    def joint(self, x, t, alpha):
        """Both branches of a biflow model in one network evaluation."""
        if self.kind != "biflow":
            raise ConfigurationError(f"joint branches need a biflow model, got {self.kind!r}")
        out = self._run(self.net_input(x, t, alpha))
        return out[..., : self.frame_dim], out[..., self.frame_dim :]

    def velocity(self, x, t, alpha=0.0):
        """Temporal-advance direction at (x, t); biflow models use their time branch."""
        if self.kind == "flow":
            return self._run(self.net_input(x, t))
        if self.kind == "biflow":
            return self.joint(x, t, alpha)[0]
        raise ConfigurationError("condiff velocity needs a condition; use cond_velocity")

    def noise_direction(self, x, t, alpha):
        """Denoising branch of a biflow model."""
        return self.joint(x, t, alpha)[1]

    def cond_velocity(self, x, cond, t):
        if self.kind != "condiff":
            raise ConfigurationError(f"cond_velocity needs a condiff model, got {self.kind!r}")
        return self._run(self.net_input(x, t, cond=cond))


def init_model(
    kind: str,
    frame_dim: int,
    hidden_dims=(256, 256, 256),
    activation: str = "silu",
    coord_embedding: str = "sinusoidal",
    n_frequencies: int = 4,
    seed: int = 0,
) -> FieldModel:
    spec = build_net_spec(kind, frame_dim, hidden_dims, activation, coord_embedding, n_frequencies)
    params = nn.init_params(spec, np.random.default_rng(seed))
    return FieldModel(kind, frame_dim, spec, params)
