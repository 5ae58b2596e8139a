"""Initial-value-problem solvers that count every field evaluation.

Two methods: fixed-step Euler and an embedded Euler/Heun pair with a
proportional step controller.  The evaluation count is the cost metric
used throughout the experiments, so rejected adaptive steps still count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DivergenceError

_EDGE = 1e-9  # interval remainders below this are considered consumed


@dataclass
class SolveSpec:
    """Solver choice and controls; eval_counter is reset by each solve."""

    method: str = "heun_adaptive"  # or "euler_fixed"
    direction: str = "forward"  # forward: 0 -> 1, backward: 1 -> 0
    step_size: float = 0.05
    atol: float = 1e-2
    rtol: float = 1e-2
    initial_step: float = 0.1
    min_step: float = 1e-4
    max_step: float = 1.0
    safety: float = 0.9
    shrink_min: float = 0.2
    grow_max: float = 5.0
    eval_counter: int = 0

    def __post_init__(self):
        if self.method not in ("euler_fixed", "heun_adaptive"):
            raise ConfigurationError(f"unknown solver method {self.method!r}")
        if self.direction not in ("forward", "backward"):
            raise ConfigurationError(f"unknown direction {self.direction!r}")
        if not 0.0 < self.step_size <= 1.0:
            raise ConfigurationError("step_size must be in (0, 1]")
        if self.atol <= 0.0 or self.rtol <= 0.0:
            raise ConfigurationError("atol and rtol must be positive")
        if not 0.0 < self.min_step <= self.initial_step <= self.max_step:
            raise ConfigurationError("need 0 < min_step <= initial_step <= max_step")


def heun_adaptive_step(
    field,
    x: np.ndarray,
    s: float,
    h: float,
    atol: float,
    rtol: float,
    safety: float = 0.9,
    shrink_min: float = 0.2,
    grow_max: float = 5.0,
):
    """One attempt of the embedded Euler/Heun pair; ``h`` may be signed.

    The error estimate is the Heun-Euler gap under the mixed tolerance
    norm max_i |e_i| / (atol + rtol * |x_i|); the step is accepted when it
    is at most 1.  Returns (accepted, x_next, s_next, h_next, err_norm);
    a rejected attempt leaves (x, s) unchanged.  Two field evaluations are
    spent either way.
    """
    with np.errstate(invalid="ignore", over="ignore"):
        k1 = field(x, s)
        x_euler = x + h * k1
        k2 = field(x_euler, s + h)
        x_heun = x + 0.5 * h * (k1 + k2)
        err = x_heun - x_euler
        scale = atol + rtol * np.abs(x)
        err_norm = float(np.max(np.abs(err) / scale))
    if not (math.isfinite(err_norm) and np.all(np.isfinite(x_heun))):
        err_norm = math.inf
    accepted = err_norm <= 1.0
    if err_norm == 0.0:
        factor = grow_max
    else:
        factor = min(max(safety * err_norm**-0.5, shrink_min), grow_max)
    h_next = h * factor
    if accepted:
        return True, x_heun, s + h, h_next, err_norm
    return False, x, s, h_next, err_norm


def _euler(field, x, s0, s1, spec):
    sign = 1.0 if s1 >= s0 else -1.0
    x = np.array(x, dtype=np.float64)
    s = s0
    evals = 0
    while (s1 - s) * sign > _EDGE:
        h = min(spec.step_size, (s1 - s) * sign)
        k = field(x, s)
        evals += 1
        x = x + sign * h * k
        if not np.all(np.isfinite(x)):
            raise DivergenceError(f"state became non-finite at s={s}", coordinate=s, evals=evals)
        s = s1 if h >= (s1 - s) * sign else s + sign * h
    return x, evals


def _heun(field, x, s0, s1, spec):
    sign = 1.0 if s1 >= s0 else -1.0
    x = np.array(x, dtype=np.float64)
    s = s0
    evals = 0
    h = min(max(spec.initial_step, spec.min_step), spec.max_step)
    while (s1 - s) * sign > _EDGE:
        h_try = min(h, (s1 - s) * sign)
        accepted, x_new, s_new, h_next, _ = heun_adaptive_step(
            field,
            x,
            s,
            sign * h_try,
            spec.atol,
            spec.rtol,
            safety=spec.safety,
            shrink_min=spec.shrink_min,
            grow_max=spec.grow_max,
        )
        evals += 2
        if accepted:
            x, s = x_new, s_new
        elif h_try <= spec.min_step * (1.0 + 1e-12):
            raise DivergenceError(
                f"step size underflowed min_step={spec.min_step} at s={s}",
                coordinate=s,
                evals=evals,
            )
        h = min(max(abs(h_next), spec.min_step), spec.max_step)
    return x, evals


def solve(field, x_init, spec: SolveSpec, s0: float | None = None, s1: float | None = None):
    """Integrate dx/ds = field(x, s) over the unit interval (or [s0, s1]).

    The default interval follows spec.direction: forward 0 -> 1, backward
    1 -> 0.  Returns (x_final, evals) and stores evals in
    spec.eval_counter.
    """
    x_init = np.asarray(x_init, dtype=np.float64)
    if not np.all(np.isfinite(x_init)):
        raise ConfigurationError("initial value must be finite")
    if s0 is None or s1 is None:
        s0, s1 = (0.0, 1.0) if spec.direction == "forward" else (1.0, 0.0)
    spec.eval_counter = 0
    if spec.method == "euler_fixed":
        x, evals = _euler(field, x_init, s0, s1, spec)
    else:
        x, evals = _heun(field, x_init, s0, s1, spec)
    spec.eval_counter = evals
    return x, evals
