import numpy as np
import pytest

from biflow import nn, sampling
from biflow.data import read_frames
from biflow.errors import ConfigurationError
from biflow.fields import init_model
from biflow.sampling import (
    CharacteristicCurve,
    denoise,
    export_rollout,
    joint_field_eval,
    joint_next,
    rollout,
    rollout_backward,
    stream_next,
)
from biflow.solvers import SolveSpec


def heun_spec():
    return SolveSpec(method="heun_adaptive")


def euler_spec(h=0.05):
    return SolveSpec(method="euler_fixed", step_size=h)


def biflow_model(frame_dim=3, seed=0):
    return init_model("biflow", frame_dim, hidden_dims=(6, 5), n_frequencies=2, seed=seed)


def constant_biflow(frame_dim, fv, fn):
    """Bias-only model: both branches output constants regardless of input."""
    model = biflow_model(frame_dim)
    model.params = np.zeros_like(model.params)
    layout = nn.param_layout(model.net)
    last_bias = f"b{len(model.net.layer_dims) - 1}"
    off = 0
    for name, shape in layout:
        size = int(np.prod(shape))
        if name == last_bias:
            model.params[off : off + size] = np.concatenate([fv, fn])
        off += size
    return model


# ---------------------------------------------------------------------------
# characteristic curves
# ---------------------------------------------------------------------------


def test_linear_curve_coords_and_derivative():
    curve = CharacteristicCurve("linear", 0.2)
    assert curve.coords(0.0) == (0.0, 0.2)
    assert curve.coords(1.0) == (1.0, 0.0)
    t, a = curve.coords(0.25)
    assert (t, a) == (0.25, 0.2 * 0.75)
    assert curve.derivative(0.5) == (1.0, -0.2)


def test_piecewise_curves_hit_midpoints():
    std = CharacteristicCurve("solve_then_denoise", 0.3)
    assert std.coords(0.0) == (0.0, 0.3)
    assert std.coords(0.5) == (1.0, 0.3)
    assert std.coords(1.0) == (1.0, 0.0)
    assert std.derivative(0.2) == (2.0, 0.0)
    assert std.derivative(0.7) == (0.0, -0.6)

    dts = CharacteristicCurve("denoise_then_solve", 0.3)
    assert dts.coords(0.0) == (0.0, 0.3)
    assert dts.coords(0.5) == (0.0, 0.0)
    assert dts.coords(1.0) == (1.0, 0.0)
    # first segment moves only along the noise axis at rate -2 epsilon
    assert dts.derivative(0.2) == (0.0, -0.6)
    assert dts.derivative(0.7) == (2.0, 0.0)


def test_curves_are_continuous_piecewise_lines():
    # the documented parameterization: two linear segments joined at k = 0.5
    for shape in ("solve_then_denoise", "denoise_then_solve"):
        curve = CharacteristicCurve(shape, 0.25)
        for k0, k1 in [(0.0, 0.49), (0.5, 0.99)]:
            t0, a0 = curve.coords(k0)
            dt, da = curve.derivative(k0)
            t1, a1 = curve.coords(k1)
            np.testing.assert_allclose([t1, a1], [t0 + dt * (k1 - k0), a0 + da * (k1 - k0)], atol=1e-12)


def test_curve_validation():
    with pytest.raises(ConfigurationError):
        CharacteristicCurve("zigzag", 0.1)
    with pytest.raises(ConfigurationError):
        CharacteristicCurve("linear", -0.1)


# ---------------------------------------------------------------------------
# joint field evaluation
# ---------------------------------------------------------------------------


def test_joint_eval_epsilon_zero_equals_time_branch():
    model = biflow_model()
    curve = CharacteristicCurve("linear", 0.0)
    x = np.array([0.1, -0.2, 0.3])
    out = joint_field_eval(model, x, 0.4, 0.0, curve, 0.4)
    fv = model.joint(x, 0.4, 0.0)[0]
    assert out.tobytes() == fv.tobytes()


def test_joint_eval_linear_identity():
    rng = np.random.default_rng(12)
    for trial in range(100):
        model = biflow_model(seed=trial % 7)
        eps = float(rng.uniform(0.01, 0.5))
        curve = CharacteristicCurve("linear", eps)
        x = rng.standard_normal(3)
        t, a, k = rng.uniform(size=3)
        out = joint_field_eval(model, x, t, a, curve, k)
        fv, fn = model.joint(x, t, a)
        direct = fv - eps * fn
        denom = np.maximum(np.abs(direct), 1e-300)
        assert np.max(np.abs(out - direct) / denom) <= 1e-12


def test_joint_eval_piecewise_segments():
    model = biflow_model(seed=3)
    eps = 0.3
    curve = CharacteristicCurve("denoise_then_solve", eps)
    x = np.array([0.5, 0.0, -0.5])
    k = 0.2
    t, a = curve.coords(k)
    out = joint_field_eval(model, x, t, a, curve, k)
    fv, fn = model.joint(x, t, a)
    np.testing.assert_array_equal(out, fn * (-2.0 * eps))


def test_joint_eval_rejects_plain_flow():
    flow = init_model("flow", 3, hidden_dims=(4,), seed=0)
    with pytest.raises(ConfigurationError):
        joint_field_eval(flow, np.zeros(3), 0.5, 0.0, CharacteristicCurve(), 0.5)


# ---------------------------------------------------------------------------
# streaming / joint / denoise steps
# ---------------------------------------------------------------------------


def test_stream_zero_velocity_keeps_frame():
    model = constant_biflow(3, np.zeros(3), np.zeros(3))
    prev = np.array([0.2, -0.1, 0.4])
    nxt, steps = stream_next(model, prev, heun_spec())
    np.testing.assert_array_equal(nxt, prev)
    assert steps > 0


def test_stream_constant_velocity_integrates_exactly():
    c = np.array([0.5, -1.0, 0.25])
    model = constant_biflow(3, c, np.zeros(3))
    prev = np.zeros(3)
    nxt, _ = stream_next(model, prev, euler_spec())
    np.testing.assert_allclose(nxt, c, atol=1e-13)


def test_joint_epsilon_zero_matches_stream_bitwise():
    model = biflow_model(seed=5)
    prev = np.array([0.3, 0.1, -0.2])
    curve = CharacteristicCurve("linear", 0.0)
    a, stream_steps = stream_next(model, prev, heun_spec())
    b, joint_steps = joint_next(model, prev, curve, [0, 1], heun_spec())
    assert a.tobytes() == b.tobytes()
    assert stream_steps == joint_steps


def test_joint_perfect_denoiser_cancels_injected_noise():
    # f_v = 0 and the noise branch reproducing the injected direction undoes
    # the corruption along the linear curve: d x / d k = -eps * n
    frame_dim = 2
    prev = np.array([0.4, -0.6])
    seed = [9, 3]
    eps = 0.25
    noise = np.random.default_rng(seed).standard_normal(frame_dim)
    model = constant_biflow(frame_dim, np.zeros(frame_dim), noise)
    nxt, _ = joint_next(model, prev, CharacteristicCurve("linear", eps), seed, euler_spec())
    np.testing.assert_allclose(nxt, prev, atol=1e-12)


def test_denoise_constant_branch_integrates_linearly():
    n_hat = np.array([1.0, -2.0])
    model = constant_biflow(2, np.zeros(2), n_hat)
    corrupted = np.array([0.5, 0.5])
    out = denoise(model, corrupted, 0.3, euler_spec())
    np.testing.assert_allclose(out, corrupted - 0.3 * n_hat, atol=1e-13)


def test_denoise_zero_length_limit_returns_input():
    model = biflow_model()
    x = np.array([0.1, 0.2, 0.3])
    out = denoise(model, x, 1e-12, euler_spec())
    np.testing.assert_array_equal(out, x)


def test_denoise_validates_alpha():
    model = biflow_model()
    with pytest.raises(ConfigurationError):
        denoise(model, np.zeros(3), 0.0, heun_spec())


# ---------------------------------------------------------------------------
# rollouts
# ---------------------------------------------------------------------------


def test_rollout_single_frame_no_solves():
    model = biflow_model()
    r = rollout(model, np.zeros(3), 1, heun_spec())
    assert r.frames.num_frames == 1
    assert r.per_frame_steps == []


def test_rollout_steps_invariant():
    model = biflow_model(seed=1)
    r = rollout(model, np.full(3, 0.1), 6, heun_spec(), curve=CharacteristicCurve("linear", 0.1), seed=4)
    assert len(r.per_frame_steps) == r.frames.num_frames - 1
    assert all(s > 0 for s in r.per_frame_steps)


def test_rollout_biflow_eps0_equals_stream_pattern_bitwise():
    model = biflow_model(seed=2)
    start = np.array([0.2, -0.2, 0.4])
    joint = rollout(model, start, 10, heun_spec(), curve=CharacteristicCurve("linear", 0.0), seed=7)
    stream = rollout(model, start, 10, heun_spec(), seed=7, pattern="stream")
    assert joint.frames.frames.tobytes() == stream.frames.frames.tobytes()
    assert joint.per_frame_steps == stream.per_frame_steps


def test_rollout_reproducible_from_seed():
    model = biflow_model(seed=6)
    kw = dict(curve=CharacteristicCurve("linear", 0.2), seed=11)
    a = rollout(model, np.full(3, 0.1), 5, heun_spec(), **kw)
    b = rollout(model, np.full(3, 0.1), 5, heun_spec(), **kw)
    assert a.frames.frames.tobytes() == b.frames.frames.tobytes()


def test_rollout_step_accounting_matches_model_instrumentation():
    model = biflow_model(seed=8)
    model.eval_count = 0
    r = rollout(model, np.full(3, 0.2), 7, heun_spec(), curve=CharacteristicCurve("linear", 0.1), seed=1)
    assert sum(r.per_frame_steps) == model.eval_count


def test_rollout_condiff_uses_fresh_noise_and_condition():
    model = init_model("condiff", 2, hidden_dims=(5,), seed=0)
    model.params = np.zeros_like(model.params)
    r = rollout(model, np.array([0.3, 0.4]), 4, euler_spec(), seed=2)
    # zero model: the solve keeps the fresh-noise initial value per frame
    for i in range(1, 4):
        expected = np.random.default_rng([2, i]).standard_normal(2)
        np.testing.assert_allclose(r.frames.flat[i], expected, atol=1e-13)


def test_rollout_backward_constant_field_subtracts_velocity():
    c = np.array([0.2, -0.3])
    model = constant_biflow(2, c, np.zeros(2))
    r = rollout_backward(model, np.array([1.0, 1.0]), 3, 0.0, euler_spec(), seed=0)
    np.testing.assert_allclose(r.frames.flat[1], [1.0, 1.0] - c, atol=1e-13)
    np.testing.assert_allclose(r.frames.flat[2], [1.0, 1.0] - 2 * c, atol=1e-12)
    assert r.direction == "backward"


def test_rollout_backward_inverts_forward_on_smooth_field():
    model = biflow_model(seed=9)
    start = np.array([0.1, 0.05, -0.1])
    fwd, _ = stream_next(model, start, heun_spec())
    back = rollout_backward(model, fwd, 2, 0.0, heun_spec(), seed=0)
    assert np.max(np.abs(back.frames.flat[1] - start)) <= 10 * 1e-2


def test_rollout_kind_pattern_validation():
    flow = init_model("flow", 3, hidden_dims=(4,), seed=0)
    condiff = init_model("condiff", 3, hidden_dims=(4,), seed=0)
    with pytest.raises(ConfigurationError):
        rollout(flow, np.zeros(3), 3, heun_spec(), pattern="joint")
    with pytest.raises(ConfigurationError):
        rollout(condiff, np.zeros(3), 3, heun_spec(), pattern="stream")
    with pytest.raises(ConfigurationError):
        rollout_backward(flow, np.zeros(3), 3, 0.1, heun_spec())
    with pytest.raises(ConfigurationError):
        joint_next(flow, np.zeros(3), CharacteristicCurve(), [0, 0], heun_spec())


def test_export_rollout_round_trip(tmp_path):
    model = biflow_model(seed=4)
    r = rollout(model, np.full(3, 0.1), 5, heun_spec(), curve=CharacteristicCurve("linear", 0.2), seed=3)
    bfv = tmp_path / "r.bfv"
    export_rollout(r, bfv)
    back = read_frames(bfv)
    np.testing.assert_allclose(back.flat, r.frames.flat, atol=1e-7)  # float32 payload
    meta = (tmp_path / "r.bfv.meta.txt").read_text()
    assert "epsilon = 0.2" in meta
    assert "per_frame_steps = " + ",".join(str(s) for s in r.per_frame_steps) in meta
    assert "curve = linear" in meta
