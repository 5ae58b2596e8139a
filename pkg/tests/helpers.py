"""Shared test utilities: finite differences and tolerance helpers."""

import numpy as np


def central_diff(fn, params, h=1e-6):
    """Central finite-difference gradient of scalar fn(params)."""
    grad = np.empty_like(params)
    for i in range(params.size):
        bumped = params.copy()
        bumped[i] += h
        hi = fn(bumped)
        bumped[i] -= 2 * h
        lo = fn(bumped)
        grad[i] = (hi - lo) / (2 * h)
    return grad


def max_rel_err(a, b, floor=1e-3):
    """Per-coordinate relative error with a floor guarding tiny denominators.

    Coordinates whose magnitude is below the floor are effectively compared
    absolutely at floor * tolerance, which keeps finite-difference roundoff
    (~1e-9 at h=1e-6) from dominating near-zero gradient entries.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)
    return float(np.max(np.abs(a - b) / denom))
