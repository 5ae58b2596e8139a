import math

import numpy as np
import pytest

from biflow.errors import ConfigurationError, DivergenceError
from biflow.solvers import SolveSpec, heun_adaptive_step, solve


def euler_spec(h=0.05):
    return SolveSpec(method="euler_fixed", step_size=h)


def heun_spec(**kw):
    return SolveSpec(method="heun_adaptive", **kw)


def heun_fixed(h):
    # pin min = initial = max and open the tolerances: every step accepted at
    # exactly h, which turns the embedded pair into fixed-step Heun
    return SolveSpec(
        method="heun_adaptive", atol=1e9, rtol=1e9, initial_step=h, min_step=h, max_step=h
    )


def test_zero_field_returns_initial():
    x0 = np.array([0.3, -0.7])
    for spec in (euler_spec(), heun_spec()):
        x, steps = solve(lambda x, s: np.zeros_like(x), x0, spec)
        np.testing.assert_array_equal(x, x0)
        assert steps > 0


def test_constant_field_exact_for_any_step():
    c = np.array([2.0, -1.0, 0.5])
    for h in (0.05, 0.3, 1.0):
        x, _ = solve(lambda x, s: c, np.zeros(3), euler_spec(h))
        np.testing.assert_allclose(x, c, atol=1e-13)


def test_exponential_decay_within_tolerance():
    x, _ = solve(lambda x, s: -x, np.array([1.0]), heun_spec())
    assert abs(x[0] - math.exp(-1)) <= 1e-2


def test_euler_step_count_is_ceil():
    for h, expected in [(0.05, 20), (0.1, 10), (0.3, 4), (1.0, 1)]:
        calls = []
        x, steps = solve(lambda x, s: calls.append(s) or -x, np.array([1.0]), euler_spec(h))
        assert steps == expected == len(calls)


def test_heun_counts_two_evals_per_attempt_including_rejections():
    calls = [0]

    def field(x, s):
        calls[0] += 1
        return -50.0 * x  # stiff enough to force rejections at the default start step

    spec = heun_spec()
    x, steps = solve(field, np.array([1.0]), spec)
    assert steps == calls[0]
    assert steps % 2 == 0
    assert spec.eval_counter == steps


def test_heun_step_hand_arithmetic():
    # one attempt on dx/ds = -x from x=1 with h=0.5, atol=rtol=1e-2:
    # k1=-1, x_e=0.5, k2=-0.5, x_h=0.625, err=0.125, scale=0.02 -> err_norm=6.25
    accepted, x_next, s_next, h_next, err = heun_adaptive_step(
        lambda x, s: -x, np.array([1.0]), 0.0, 0.5, 1e-2, 1e-2
    )
    assert not accepted
    np.testing.assert_array_equal(x_next, [1.0])
    assert s_next == 0.0
    assert abs(err - 6.25) < 1e-12
    assert abs(h_next - 0.5 * 0.9 * 6.25**-0.5) < 1e-12


def test_heun_step_zero_field_grows_by_grow_max():
    accepted, x_next, s_next, h_next, err = heun_adaptive_step(
        lambda x, s: np.zeros_like(x), np.array([1.0]), 0.2, 0.1, 1e-2, 1e-2
    )
    assert accepted
    assert err == 0.0
    assert abs(h_next - 0.5) < 1e-15


def test_tighter_tolerance_increases_steps():
    loose = heun_spec(atol=1e-2, rtol=1e-2)
    tight = heun_spec(atol=1e-4, rtol=1e-4)
    _, loose_steps = solve(lambda x, s: -x, np.array([1.0]), loose)
    _, tight_steps = solve(lambda x, s: -x, np.array([1.0]), tight)
    assert tight_steps > loose_steps


def test_euler_first_order_convergence():
    def err(h):
        x, _ = solve(lambda x, s: -x, np.array([1.0]), euler_spec(h))
        return abs(x[0] - math.exp(-1))

    ratio = err(0.05) / err(0.025)
    assert 1.6 <= ratio <= 2.4


def test_heun_second_order_convergence():
    def err(h):
        x, _ = solve(lambda x, s: -x, np.array([1.0]), heun_fixed(h))
        return abs(x[0] - math.exp(-1))

    ratio = err(0.1) / err(0.05)
    assert 3.2 <= ratio <= 4.8


def test_forward_then_backward_returns_to_start():
    def field(x, s):
        return -x

    x0 = np.array([1.0])
    fwd = heun_spec()
    x1, _ = solve(field, x0, fwd)
    back = heun_spec()
    back.direction = "backward"
    x0_again, _ = solve(field, x1, back)
    assert abs(x0_again[0] - x0[0]) <= 10 * fwd.atol


def test_backward_direction_default_interval():
    # backward default solves from s=1 down to s=0
    seen = []
    spec = euler_spec(0.5)
    spec.direction = "backward"
    solve(lambda x, s: seen.append(s) or np.zeros_like(x), np.array([0.0]), spec)
    assert seen == [1.0, 0.5]


def test_sub_interval_solve():
    # constant field over [0.3, 0]: x decreases by 0.3 * c
    c = np.array([2.0])
    x, _ = solve(lambda x, s: c, np.array([1.0]), euler_spec(0.05), s0=0.3, s1=0.0)
    np.testing.assert_allclose(x, [1.0 - 0.6], atol=1e-13)


def test_divergence_raises_with_coordinate():
    def field(x, s):
        return np.array([np.inf])

    with pytest.raises(DivergenceError) as err:
        solve(field, np.array([1.0]), heun_spec())
    assert err.value.coordinate is not None


def test_explosive_field_underflows_min_step():
    # error estimate stays enormous at every h, so the controller hits min_step
    def field(x, s):
        return np.array([1e12 * (1.0 + s) ** 9])

    spec = heun_spec(atol=1e-10, rtol=1e-10, min_step=1e-3, initial_step=0.1)
    with pytest.raises(DivergenceError):
        solve(field, np.array([0.0]), spec)


def test_spec_validation():
    with pytest.raises(ConfigurationError):
        SolveSpec(method="rk45")
    with pytest.raises(ConfigurationError):
        SolveSpec(step_size=0.0)
    with pytest.raises(ConfigurationError):
        SolveSpec(atol=-1.0)
    with pytest.raises(ConfigurationError):
        SolveSpec(min_step=0.5, initial_step=0.1)
    with pytest.raises(ConfigurationError):
        solve(lambda x, s: x, np.array([np.nan]), euler_spec())


def test_eval_counter_reset_per_solve():
    spec = heun_spec()
    _, first = solve(lambda x, s: -x, np.array([1.0]), spec)
    _, second = solve(lambda x, s: np.zeros(1), np.array([1.0]), spec)
    assert spec.eval_counter == second
    assert first != second
