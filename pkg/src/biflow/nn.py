"""Small fully connected network with explicit reverse-mode gradients.

Parameters live in a single flat float64 vector; the layout (one weight
matrix and one bias per layer) is derived from a `NetSpec`.  Everything is
plain numpy in 64-bit so gradients can be checked against finite
differences at tight tolerances.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, TrainingError

ACTIVATIONS = ("tanh", "relu", "silu")
EMBEDDINGS = ("raw", "sinusoidal")


@dataclass(frozen=True)
class NetSpec:
    """Architecture and coordinate-conditioning choices of the field network.

    ``input_dim`` counts the already-embedded input vector: the flattened
    frame plus the embedding of each scalar coordinate appended to it.
    """

    input_dim: int
    hidden_dims: tuple[int, ...]
    output_dim: int
    activation: str = "silu"
    coord_embedding: str = "sinusoidal"
    n_frequencies: int = 4

    def __post_init__(self):
        object.__setattr__(self, "hidden_dims", tuple(int(d) for d in self.hidden_dims))
        if self.activation not in ACTIVATIONS:
            raise ConfigurationError(f"unknown activation {self.activation!r}")
        if self.coord_embedding not in EMBEDDINGS:
            raise ConfigurationError(f"unknown coord embedding {self.coord_embedding!r}")
        if self.input_dim <= 0 or self.output_dim <= 0:
            raise ConfigurationError("input_dim and output_dim must be positive")
        if any(d <= 0 for d in self.hidden_dims):
            raise ConfigurationError("hidden dims must be positive")
        if self.coord_embedding == "sinusoidal" and self.n_frequencies <= 0:
            raise ConfigurationError("n_frequencies must be positive")

    @property
    def layer_dims(self) -> list[tuple[int, int]]:
        dims = [self.input_dim, *self.hidden_dims, self.output_dim]
        return list(zip(dims[:-1], dims[1:]))


def embedding_dim(spec: NetSpec) -> int:
    """Width of the embedding of one scalar coordinate."""
    if spec.coord_embedding == "raw":
        return 1
    return 2 * spec.n_frequencies


def embed_coord(spec: NetSpec, c) -> np.ndarray:
    """Embed scalar coordinate(s) ``c``; returns shape (..., embedding_dim).

    Sinusoidal embedding uses frequencies pi * 2**j for j = 0..k-1, sines
    first then cosines.
    """
    c = np.asarray(c, dtype=np.float64)
    if spec.coord_embedding == "raw":
        return c[..., None]
    freqs = np.pi * 2.0 ** np.arange(spec.n_frequencies)
    ang = c[..., None] * freqs
    return np.concatenate([np.sin(ang), np.cos(ang)], axis=-1)


def param_layout(spec: NetSpec) -> list[tuple[str, tuple[int, ...]]]:
    """Flat-vector layout: interleaved (W, b) per layer, in order."""
    layout = []
    for i, (d_in, d_out) in enumerate(spec.layer_dims):
        layout.append((f"W{i}", (d_in, d_out)))
        layout.append((f"b{i}", (d_out,)))
    return layout


def param_count(spec: NetSpec) -> int:
    return sum(int(np.prod(shape)) for _, shape in param_layout(spec))


def init_params(spec: NetSpec, rng: np.random.Generator) -> np.ndarray:
    """Fan-in-scaled uniform init: U(-1/sqrt(d_in), 1/sqrt(d_in)) per layer."""
    chunks = []
    for d_in, d_out in spec.layer_dims:
        bound = 1.0 / np.sqrt(d_in)
        chunks.append(rng.uniform(-bound, bound, size=d_in * d_out))
        chunks.append(rng.uniform(-bound, bound, size=d_out))
    return np.concatenate(chunks)


def unpack_params(spec: NetSpec, params: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
    """Views (no copies) of the per-layer (W, b) blocks."""
    if params.shape != (param_count(spec),):
        raise ConfigurationError(
            f"parameter vector has {params.size} values, spec needs {param_count(spec)}"
        )
    layers = []
    off = 0
    for d_in, d_out in spec.layer_dims:
        w = params[off : off + d_in * d_out].reshape(d_in, d_out)
        off += d_in * d_out
        b = params[off : off + d_out]
        off += d_out
        layers.append((w, b))
    return layers


def _sigmoid(z: np.ndarray) -> np.ndarray:
    # evaluated on the non-overflowing side of exp for either sign
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _act(name: str, z: np.ndarray) -> np.ndarray:
    if name == "tanh":
        return np.tanh(z)
    if name == "relu":
        return np.maximum(z, 0.0)
    return z * _sigmoid(z)


def _act_grad(name: str, z: np.ndarray) -> np.ndarray:
    if name == "tanh":
        t = np.tanh(z)
        return 1.0 - t * t
    if name == "relu":
        return (z > 0.0).astype(np.float64)
    s = _sigmoid(z)
    return s * (1.0 + z * (1.0 - s))


def _check_input(spec: NetSpec, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != spec.input_dim:
        raise ConfigurationError(
            f"input has width {x.shape[-1]}, spec.input_dim is {spec.input_dim}"
        )
    return x


def forward(spec: NetSpec, params: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Evaluate the network on ``x`` of shape (input_dim,) or (batch, input_dim)."""
    x = _check_input(spec, x)
    layers = unpack_params(spec, params)
    h = x
    for w, b in layers[:-1]:
        h = _act(spec.activation, h @ w + b)
    w, b = layers[-1]
    return h @ w + b


def _forward_cached(spec, params, x):
    """Forward pass retaining pre-activations; used by the backward pass."""
    x = _check_input(spec, x)
    layers = unpack_params(spec, params)
    acts = [x]  # post-activation inputs to each layer
    pres = []  # pre-activations of hidden layers
    h = x
    for w, b in layers[:-1]:
        z = h @ w + b
        pres.append(z)
        h = _act(spec.activation, z)
        acts.append(h)
    w, b = layers[-1]
    y = h @ w + b
    return y, (layers, acts, pres)


def _backprop(spec, cache, cotangent):
    """Reverse sweep given a cached forward; returns (flat param grad, input grad)."""
    layers, acts, pres = cache
    g = np.asarray(cotangent, dtype=np.float64)
    grads = [None] * len(layers)
    for i in range(len(layers) - 1, -1, -1):
        w, _ = layers[i]
        h_in = acts[i]
        if h_in.ndim == 1:
            gw = np.outer(h_in, g)
            gb = g.copy()
        else:
            gw = h_in.T @ g
            gb = g.sum(axis=0)
        grads[i] = (gw, gb)
        g = g @ w.T
        if i > 0:
            g = g * _act_grad(spec.activation, pres[i - 1])
    flat = np.concatenate([np.concatenate([gw.ravel(), gb]) for gw, gb in grads])
    return flat, g


def backward(spec: NetSpec, params: np.ndarray, x: np.ndarray, cotangent: np.ndarray):
    """Exact gradients of <output, cotangent> w.r.t. params and input.

    ``cotangent`` must match the output shape; batched inputs sum the
    parameter gradient over the batch.
    """
    y, cache = _forward_cached(spec, params, x)
    cot = np.asarray(cotangent, dtype=np.float64)
    if cot.shape != y.shape:
        raise ConfigurationError(f"cotangent shape {cot.shape} != output shape {y.shape}")
    return _backprop(spec, cache, cot)


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    step: int = 0


def adam_init(n_params: int) -> AdamState:
    return AdamState(np.zeros(n_params), np.zeros(n_params), 0)


def adam_step(
    params: np.ndarray,
    grads: np.ndarray,
    state: AdamState,
    lr: float = 1e-3,
    betas: tuple[float, float] = (0.9, 0.999),
    eps: float = 1e-8,
) -> tuple[np.ndarray, AdamState]:
    """One Adam update with bias correction; returns new params and state."""
    if params.shape != grads.shape or params.shape != state.m.shape:
        raise ConfigurationError("params, grads and optimizer state must share a shape")
    if not np.all(np.isfinite(grads)):
        raise TrainingError("non-finite gradient")
    b1, b2 = betas
    t = state.step + 1
    m = b1 * state.m + (1.0 - b1) * grads
    v = b2 * state.v + (1.0 - b2) * grads * grads
    m_hat = m / (1.0 - b1**t)
    v_hat = v / (1.0 - b2**t)
    new_params = params - lr * m_hat / (np.sqrt(v_hat) + eps)
    return new_params, AdamState(m, v, t)
