import numpy as np
import pytest

from biflow import cli
from biflow.checkpoint import load_checkpoint
from biflow.config import parse_config
from biflow.errors import ConfigurationError

TINY = """
dataset.kind = orbit
dataset.n_videos = 10
dataset.n_frames = 12
dataset.dim = 4
model.hidden_dims = 16, 16
training.iterations = 30
training.batch_size = 16
training.checkpoint_every = 10
training.log_every = 10
sampling.epsilon_list = 0.0, 0.2
evaluation.n_rollouts = 4
evaluation.rollout_frames = 24
evaluation.window = 8
evaluation.stride = 8
"""


def tiny_cfg(extra=""):
    return parse_config(TINY + extra)


def test_gen_data_idempotent(tmp_path):
    cfg = tiny_cfg()
    cli.cmd_gen_data(cfg, tmp_path / "a")
    cli.cmd_gen_data(cfg, tmp_path / "b")
    for name in ["manifest.json", "videos/video_0003.bfv", "config.resolved.txt"]:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_manifest_split_counts(tmp_path):
    cli.cmd_gen_data(tiny_cfg(), tmp_path / "d")
    import json

    manifest = json.loads((tmp_path / "d" / "manifest.json").read_text())
    assert manifest["n_train"] == 8 and manifest["n_test"] == 2
    assert sorted(manifest["train_ids"] + manifest["test_ids"]) == list(range(10))


def test_train_writes_checkpoint_and_curve(tmp_path):
    cfg = tiny_cfg()
    data = cli.cmd_gen_data(cfg, tmp_path / "data")
    ckpt = cli.cmd_train(cfg, data, tmp_path / "train")
    assert ckpt.exists()
    curve = (tmp_path / "train" / "loss_curve.csv").read_text().splitlines()
    assert curve[0] == "iteration,loss"
    assert len(curve) > 2
    model, state, meta = load_checkpoint(ckpt)
    assert meta["loss_kind"] == "biflow"
    assert meta["iterations_done"] == 30


def test_train_zero_iterations_keeps_initialization(tmp_path):
    cfg = tiny_cfg("training.iterations = 0")
    data = cli.cmd_gen_data(cfg, tmp_path / "data")
    ckpt = cli.cmd_train(cfg, data, tmp_path / "train")
    model, _, _ = load_checkpoint(ckpt)
    from biflow.train import build_model

    fresh = build_model(cfg, 4)
    np.testing.assert_array_equal(model.params, fresh.params)


def test_train_resume_continues_exact_stream(tmp_path):
    data = cli.cmd_gen_data(tiny_cfg(), tmp_path / "data")
    cfg = tiny_cfg("training.iterations = 20")
    ckpt_full = cli.cmd_train(cfg, data, tmp_path / "full")
    mid = tmp_path / "full" / "checkpoint_000010.bfck"
    assert mid.exists()
    # per-iteration seeding makes the resumed run reproduce the exact stream
    resumed = cli.cmd_train(tiny_cfg("training.iterations = 20"), data, tmp_path / "resumed", resume=mid)
    model_full, _, _ = load_checkpoint(ckpt_full)
    model_res, _, meta = load_checkpoint(resumed)
    assert meta["iterations_done"] == 20
    np.testing.assert_array_equal(model_res.params, model_full.params)


def test_train_resume_rejects_config_change(tmp_path):
    cfg = tiny_cfg()
    data = cli.cmd_gen_data(cfg, tmp_path / "data")
    ckpt = cli.cmd_train(cfg, data, tmp_path / "train")
    changed = tiny_cfg("training.learning_rate = 0.01")
    with pytest.raises(ConfigurationError):
        cli.cmd_train(changed, data, tmp_path / "resume", resume=ckpt)


def test_rollout_groups_and_metadata(tmp_path):
    cfg = tiny_cfg()
    data = cli.cmd_gen_data(cfg, tmp_path / "data")
    ckpt = cli.cmd_train(cfg, data, tmp_path / "train")
    groups = cli.cmd_rollout(cfg, ckpt, data, tmp_path / "rolls")
    names = sorted(g.name for g in groups)
    assert names == ["biflow_eps_0", "biflow_eps_0.2"]
    info = cli._parse_kv((groups[0] / "group.txt").read_text())
    assert info["method"] == "biflow"
    assert info["n_rollouts"] == "4"
    bfvs = sorted(groups[0].glob("roll_*.bfv"))
    assert len(bfvs) == 4


def test_rollout_single_frame_copies_initial(tmp_path):
    cfg = tiny_cfg("evaluation.rollout_frames = 1\nevaluation.window = 1")
    data = cli.cmd_gen_data(cfg, tmp_path / "data")
    ckpt = cli.cmd_train(cfg, data, tmp_path / "train")
    groups = cli.cmd_rollout(cfg, ckpt, data, tmp_path / "rolls")
    from biflow.data import read_frames

    videos, manifest = cli.load_dataset(data)
    video = read_frames(sorted(groups[0].glob("roll_*.bfv"))[0])
    assert video.num_frames == 1
    meta = cli._parse_kv((sorted(groups[0].glob("*.meta.txt"))[0]).read_text())
    kind, vid, fidx = meta["origin"].split(",")
    np.testing.assert_allclose(
        video.flat[0], videos[int(vid)].flat[int(fidx)], atol=1e-7
    )


def test_rollout_backward_on_condiff_is_config_error(tmp_path):
    cfg = tiny_cfg("model.loss = condiff")
    data = cli.cmd_gen_data(cfg, tmp_path / "data")
    ckpt = cli.cmd_train(cfg, data, tmp_path / "train")
    with pytest.raises(ConfigurationError):
        cli.cmd_rollout(cfg, ckpt, data, tmp_path / "rolls", backward=True)


def test_evaluate_reference_copies_hit_floor_and_summary_rows(tmp_path):
    cfg = tiny_cfg()
    data = cli.cmd_gen_data(cfg, tmp_path / "data")
    ckpt = cli.cmd_train(cfg, data, tmp_path / "train")
    groups = cli.cmd_rollout(cfg, ckpt, data, tmp_path / "rolls")
    out = cli.cmd_evaluate(cfg, groups, data, tmp_path / "eval")
    lines = out.read_text().splitlines()
    assert lines[0].startswith("method,epsilon,direction")
    assert len(lines) == 1 + len(groups)  # one row per (method, epsilon)
    assert (tmp_path / "eval" / "windows.csv").exists()
    assert (tmp_path / "eval" / "summary.txt").exists()


def test_evaluate_identical_dirs_identical_summaries(tmp_path):
    cfg = tiny_cfg()
    data = cli.cmd_gen_data(cfg, tmp_path / "data")
    ckpt = cli.cmd_train(cfg, data, tmp_path / "train")
    groups = cli.cmd_rollout(cfg, ckpt, data, tmp_path / "rolls")
    a = cli.cmd_evaluate(cfg, groups, data, tmp_path / "eval_a")
    b = cli.cmd_evaluate(cfg, groups, data, tmp_path / "eval_b")
    assert a.read_bytes() == b.read_bytes()


def test_plot_outputs_svg_and_reemits_csv(tmp_path):
    cfg = tiny_cfg()
    data = cli.cmd_gen_data(cfg, tmp_path / "data")
    ckpt = cli.cmd_train(cfg, data, tmp_path / "train")
    groups = cli.cmd_rollout(cfg, ckpt, data, tmp_path / "rolls")
    eval_dir = (cli.cmd_evaluate(cfg, groups, data, tmp_path / "eval")).parent
    cli.cmd_plot([eval_dir], tmp_path / "plots")
    scatter = (tmp_path / "plots" / "scatter.svg").read_text()
    assert scatter.lstrip().startswith("<?xml")
    assert (tmp_path / "plots" / "trend.svg").exists()
    assert (tmp_path / "plots" / "summary.csv").read_bytes() == (eval_dir / "summary.csv").read_bytes()
    assert (tmp_path / "plots" / "windows.csv").read_bytes() == (eval_dir / "windows.csv").read_bytes()


def test_plot_empty_input_is_error(tmp_path):
    with pytest.raises(ConfigurationError):
        cli.cmd_plot([], tmp_path / "plots")


def test_pipeline_determinism_bit_identical_summaries(tmp_path):
    cfg = tiny_cfg()
    cli.cmd_sweep(cfg, tmp_path / "run1")
    cli.cmd_sweep(tiny_cfg(), tmp_path / "run2")
    for name in ["eval/summary.csv", "eval/windows.csv"]:
        assert (tmp_path / "run1" / name).read_bytes() == (tmp_path / "run2" / name).read_bytes()


def test_main_exit_codes(tmp_path):
    cfg_path = tmp_path / "bad.cfg"
    cfg_path.write_text("dataset.kind = mazes\n")
    assert cli.main(["gen-data", "--config", str(cfg_path), "--out", str(tmp_path / "o")]) == 2
    assert cli.main(["plot", "--out", str(tmp_path / "p"), str(tmp_path / "missing")]) == 4

    good = tmp_path / "good.cfg"
    good.write_text(TINY)
    assert cli.main(["gen-data", "--config", str(good), "--out", str(tmp_path / "data")]) == 0
    assert (tmp_path / "data" / "manifest.json").exists()


def test_main_train_and_rollout_cli(tmp_path):
    good = tmp_path / "good.cfg"
    good.write_text(TINY)
    assert cli.main(["gen-data", "--config", str(good), "--out", str(tmp_path / "data")]) == 0
    assert cli.main([
        "train", "--config", str(good), "--data", str(tmp_path / "data"),
        "--out", str(tmp_path / "train"),
    ]) == 0
    assert cli.main([
        "rollout", "--config", str(good), "--data", str(tmp_path / "data"),
        "--checkpoint", str(tmp_path / "train" / "checkpoint.bfck"),
        "--out", str(tmp_path / "rolls"), "--jobs", "2",
    ]) == 0
    assert cli.main([
        "evaluate", "--config", str(good), "--data", str(tmp_path / "data"),
        "--out", str(tmp_path / "eval"),
        str(tmp_path / "rolls" / "biflow_eps_0"), str(tmp_path / "rolls" / "biflow_eps_0.2"),
    ]) == 0
