"""Turning a trained field into videos.

The joint model defines a first-order PDE over the (t, alpha) plane; a
rollout advances frame by frame, each step solving an ODE along a chosen
characteristic curve from (t, alpha) = (0, epsilon) to (1, 0).  With
epsilon = 0 this degenerates exactly to streaming generation along t.
Backward rollouts solve the reverted flow, recovering preceding frames.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from .data import VideoTensor, write_frames
from .errors import ConfigurationError, DivergenceError
from .fields import FieldModel
from .solvers import SolveSpec, solve

CURVE_SHAPES = ("linear", "solve_then_denoise", "denoise_then_solve")


@dataclass(frozen=True)
class CharacteristicCurve:
    """Path (t_k, alpha_k), k in [0, 1], from (0, epsilon) to (1, 0).

    ``linear`` moves with constant derivative (1, -epsilon).  The two
    piecewise shapes are realized as two linear segments: the first
    segment covers k < 0.5, the second k >= 0.5, with midpoints
    (1, epsilon) for solve_then_denoise and (0, 0) for denoise_then_solve.
    """

    shape: str = "linear"
    epsilon: float = 0.0

    def __post_init__(self):
        if self.shape not in CURVE_SHAPES:
            raise ConfigurationError(f"unknown curve shape {self.shape!r}")
        if self.epsilon < 0.0:
            raise ConfigurationError("epsilon must be non-negative")

    def coords(self, k: float) -> tuple[float, float]:
        e = self.epsilon
        if self.shape == "linear":
            return k, e * (1.0 - k)
        if self.shape == "solve_then_denoise":
            if k < 0.5:
                return 2.0 * k, e
            return 1.0, 2.0 * e * (1.0 - k)
        if k < 0.5:
            return 0.0, e * (1.0 - 2.0 * k)
        return 2.0 * k - 1.0, 0.0

    def derivative(self, k: float) -> tuple[float, float]:
        e = self.epsilon
        if self.shape == "linear":
            return 1.0, -e
        if self.shape == "solve_then_denoise":
            return (2.0, 0.0) if k < 0.5 else (0.0, -2.0 * e)
        return (0.0, -2.0 * e) if k < 0.5 else (2.0, 0.0)


def joint_field_eval(model: FieldModel, x, t, alpha, curve: CharacteristicCurve, k):
    """dx/dk along the curve: time branch * dt/dk + noise branch * dalpha/dk.

    Terms whose curve derivative is exactly zero are skipped, so a zero
    component contributes nothing at all (streaming and epsilon = 0 joint
    sampling stay bit-identical).
    """
    dt, da = curve.derivative(k)
    fv, fn = model.joint(x, t, alpha)
    if da == 0.0:
        return fv * dt
    if dt == 0.0:
        return fn * da
    return fv * dt + fn * da


def stream_next(model: FieldModel, prev_frame, spec: SolveSpec):
    """Advance one frame along t with alpha pinned to 0."""
    if model.kind == "condiff":
        raise ConfigurationError("streaming needs a flow or biflow model")

    def fieldfn(x, s):
        return model.velocity(x, s, 0.0)

    return solve(fieldfn, prev_frame, spec, s0=0.0, s1=1.0)


def joint_next(model: FieldModel, prev_frame, curve: CharacteristicCurve, noise_seed, spec):
    """Advance one frame along the characteristic curve, denoising on the way.

    The initial value is the previous frame plus epsilon-scaled fresh noise
    drawn from ``noise_seed``; with epsilon = 0 no noise is added and the
    result matches stream_next exactly.
    """
    if model.kind != "biflow":
        raise ConfigurationError("joint sampling needs a biflow model")
    prev_frame = np.asarray(prev_frame, dtype=np.float64)
    if curve.epsilon > 0.0:
        noise = np.random.default_rng(noise_seed).standard_normal(prev_frame.shape)
        x0 = prev_frame + curve.epsilon * noise
    else:
        x0 = prev_frame.copy()

    def fieldfn(x, k):
        t, a = curve.coords(k)
        return joint_field_eval(model, x, t, a, curve, k)

    return solve(fieldfn, x0, spec, s0=0.0, s1=1.0)


def denoise(model: FieldModel, corrupted_frame, alpha_start: float, spec: SolveSpec, t: float = 0.0):
    """Solve the denoiser branch from alpha_start down to 0 at fixed t."""
    if model.kind != "biflow":
        raise ConfigurationError("denoising needs a biflow model")
    if alpha_start <= 0.0:
        raise ConfigurationError("alpha_start must be positive")

    def fieldfn(x, a):
        return model.noise_direction(x, t, a)

    x, _ = solve(fieldfn, corrupted_frame, spec, s0=alpha_start, s1=0.0)
    return x


@dataclass
class Rollout:
    """A generated frame sequence plus its cost accounting and provenance."""

    frames: VideoTensor
    per_frame_steps: list[int]
    method: str
    solver: SolveSpec
    curve: CharacteristicCurve | None = None
    seed: int = 0
    origin: tuple | None = None  # (dataset id, video id, frame index)
    diverged_at: int | None = None
    direction: str = "forward"

    @property
    def flat(self) -> np.ndarray:
        return self.frames.flat


def _pack_frames(frames: list[np.ndarray], frame_shape) -> VideoTensor:
    stack = np.stack(frames)
    return VideoTensor(stack.reshape(len(frames), *frame_shape))


def rollout(
    model: FieldModel,
    initial_frame,
    n_frames: int,
    spec: SolveSpec,
    curve: CharacteristicCurve | None = None,
    seed: int = 0,
    frame_shape=None,
    origin=None,
    pattern: str | None = None,
):
    """Markovian generation of n_frames starting from initial_frame.

    The sampling pattern follows the model kind (biflow -> joint sampling,
    flow -> streaming, condiff -> solve from fresh noise conditioned on the
    last frame); ``pattern="stream"`` forces streaming for a biflow model.
    On solver divergence the partial rollout is returned flagged with the
    frame index reached.
    """
    initial_frame = np.asarray(initial_frame, dtype=np.float64).ravel()
    if frame_shape is None:
        frame_shape = (1, 1, initial_frame.size)
    if n_frames < 1:
        raise ConfigurationError("n_frames must be at least 1")
    if pattern is None:
        pattern = "joint" if model.kind == "biflow" else model.kind
    if pattern == "joint" and model.kind != "biflow":
        raise ConfigurationError(f"joint sampling needs a biflow model, got {model.kind!r}")
    if pattern == "stream" and model.kind == "condiff":
        raise ConfigurationError("streaming is undefined for a condiff model")
    if pattern in ("joint",) and curve is None:
        curve = CharacteristicCurve("linear", 0.0)

    frames = [initial_frame]
    steps: list[int] = []
    diverged_at = None
    method = model.kind
    for i in range(1, n_frames):
        prev = frames[-1]
        try:
            if pattern == "joint":
                nxt, n_evals = joint_next(model, prev, curve, [seed, i], spec)
            elif pattern in ("stream", "flow"):
                nxt, n_evals = stream_next(model, prev, spec)
            elif pattern == "condiff":
                z0 = np.random.default_rng([seed, i]).standard_normal(prev.size)

                def fieldfn(z, s, cond=prev):
                    return model.cond_velocity(z, cond, s)

                nxt, n_evals = solve(fieldfn, z0, spec, s0=0.0, s1=1.0)
            else:
                raise ConfigurationError(f"unknown sampling pattern {pattern!r}")
        except DivergenceError:
            diverged_at = i
            break
        frames.append(nxt)
        steps.append(n_evals)
    return Rollout(
        frames=_pack_frames(frames, frame_shape),
        per_frame_steps=steps,
        method=method,
        solver=spec,
        curve=curve,
        seed=seed,
        origin=origin,
        diverged_at=diverged_at,
    )


def rollout_backward(
    model: FieldModel,
    initial_frame,
    n_frames: int,
    epsilon: float,
    spec: SolveSpec,
    seed: int = 0,
    frame_shape=None,
    origin=None,
):
    """Generate preceding frames by solving the reverted joint flow.

    Each step solves along the line (t_k, alpha_k) = (k, epsilon * k) from
    k = 1 down to 0 with initial value current + epsilon * noise; the noise
    sits at the t = 1 end of the curve, so the alpha coordinate vanishes at
    the recovered frame.  frames[i] lies i steps in the past.
    """
    if model.kind != "biflow":
        raise ConfigurationError("backward solving needs a biflow model")
    if epsilon < 0.0:
        raise ConfigurationError("epsilon must be non-negative")
    initial_frame = np.asarray(initial_frame, dtype=np.float64).ravel()
    if frame_shape is None:
        frame_shape = (1, 1, initial_frame.size)

    def fieldfn(x, k):
        fv, fn = model.joint(x, k, epsilon * k)
        if epsilon == 0.0:
            return fv
        return fv + epsilon * fn

    frames = [initial_frame]
    steps: list[int] = []
    diverged_at = None
    for i in range(1, n_frames):
        cur = frames[-1]
        if epsilon > 0.0:
            noise = np.random.default_rng([seed, i]).standard_normal(cur.size)
            x1 = cur + epsilon * noise
        else:
            x1 = cur.copy()
        try:
            prev, n_evals = solve(fieldfn, x1, spec, s0=1.0, s1=0.0)
        except DivergenceError:
            diverged_at = i
            break
        frames.append(prev)
        steps.append(n_evals)
    return Rollout(
        frames=_pack_frames(frames, frame_shape),
        per_frame_steps=steps,
        method=model.kind,
        solver=spec,
        curve=CharacteristicCurve("linear", epsilon),
        seed=seed,
        origin=origin,
        diverged_at=diverged_at,
        direction="backward",
    )


# ---------------------------------------------------------------------------
# export
# ---------------------------------------------------------------------------


def rollout_metadata_text(r: Rollout) -> str:
    """Sidecar metadata: seed, noise level, curve, solver, per-frame steps."""
    solver = r.solver
    if solver.method == "euler_fixed":
        solver_desc = f"euler_fixed step_size={solver.step_size!r}"
    else:
        solver_desc = (
            f"heun_adaptive atol={solver.atol!r} rtol={solver.rtol!r} "
            f"initial_step={solver.initial_step!r} min_step={solver.min_step!r} "
            f"max_step={solver.max_step!r}"
        )
    buf = io.StringIO()
    buf.write(f"method = {r.method}\n")
    buf.write(f"direction = {r.direction}\n")
    buf.write(f"seed = {r.seed}\n")
    buf.write(f"epsilon = {(r.curve.epsilon if r.curve else 0.0)!r}\n")
    buf.write(f"curve = {(r.curve.shape if r.curve else 'none')}\n")
    buf.write(f"solver = {solver_desc}\n")
    origin = "" if r.origin is None else ",".join(str(v) for v in r.origin)
    buf.write(f"origin = {origin}\n")
    buf.write(f"diverged_at = {'' if r.diverged_at is None else r.diverged_at}\n")
    buf.write("per_frame_steps = " + ",".join(str(s) for s in r.per_frame_steps) + "\n")
    return buf.getvalue()


def export_rollout(r: Rollout, bfv_path, meta_path=None) -> None:
    """Write frames in the BFV1 format plus the sidecar metadata text file."""
    write_frames(bfv_path, r.frames)
    if meta_path is None:
        meta_path = str(bfv_path) + ".meta.txt"
    with open(meta_path, "w") as fh:
        fh.write(rollout_metadata_text(r))
