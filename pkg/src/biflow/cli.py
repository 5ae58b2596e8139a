"""Command-line pipeline: gen-data, train, rollout, evaluate, plot, sweep.

Every command writes a self-describing run directory (resolved config and
tool version).  Exit codes: 0 success, 2 configuration error, 3 numeric
divergence or training failure, 4 I/O or format error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .checkpoint import load_checkpoint, save_checkpoint
from .config import ExperimentConfig, config_hash, format_config, frame_shape, load_config
from .data import PairSampler, read_frames, split_videos, write_frames, gen_bounce, gen_orbit
from .errors import BiflowError, ConfigurationError, DivergenceError, FormatError, TrainingError
from .fields import FieldModel
from .metrics import aggregate_steps, drift_slope, reference_stats, sliding_fvd
from .sampling import CharacteristicCurve, export_rollout, rollout, rollout_backward
from .train import train_model


def _write_resolved(cfg: ExperimentConfig, out_dir: Path) -> None:
    text = f"# biflow {__version__}\n" + format_config(cfg)
    (out_dir / "config.resolved.txt").write_text(text)


def _ensure_dir(path) -> Path:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _parse_kv(text: str) -> dict[str, str]:
    out = {}
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#") or "=" not in line:
            continue
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


# ---------------------------------------------------------------------------
# gen-data
# ---------------------------------------------------------------------------


def generate_videos(cfg: ExperimentConfig):
    d = cfg.dataset
    if d.kind == "orbit":
        return gen_orbit(
            d.n_videos,
            d.n_frames,
            d.dim,
            angular_speed=d.angular_speed,
            process_noise=d.process_noise,
            seed=d.seed,
            radius_range=(d.radius_min, d.radius_max),
        )
    return gen_bounce(
        d.n_videos,
        d.n_frames,
        grid=(d.height, d.width),
        blob_sigma=d.blob_sigma,
        speed=d.speed,
        seed=d.seed,
    )


def cmd_gen_data(cfg: ExperimentConfig, out_dir) -> Path:
    out_dir = _ensure_dir(out_dir)
    videos = generate_videos(cfg)
    vid_dir = _ensure_dir(out_dir / "videos")
    files = []
    for i, video in enumerate(videos):
        name = f"video_{i:04d}.bfv"
        write_frames(vid_dir / name, video)
        files.append(name)
    train_ids, test_ids = split_videos(cfg.dataset.n_videos, cfg.dataset.train_fraction, cfg.dataset.seed)
    c, h, w = videos[0].frame_shape
    manifest = {
        "kind": cfg.dataset.kind,
        "n_videos": cfg.dataset.n_videos,
        "n_frames": cfg.dataset.n_frames,
        "channels": c,
        "height": h,
        "width": w,
        "seed": cfg.dataset.seed,
        "config_hash": config_hash(cfg),
        "files": files,
        "train_ids": train_ids,
        "test_ids": test_ids,
        "n_train": len(train_ids),
        "n_test": len(test_ids),
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    _write_resolved(cfg, out_dir)
    return out_dir


def load_dataset(data_dir):
    data_dir = Path(data_dir)
    manifest_path = data_dir / "manifest.json"
    if not manifest_path.exists():
        raise FormatError(f"no manifest.json in {data_dir}")
    manifest = json.loads(manifest_path.read_text())
    videos = [read_frames(data_dir / "videos" / name) for name in manifest["files"]]
    return videos, manifest


# ---------------------------------------------------------------------------
# train
# ---------------------------------------------------------------------------


def cmd_train(cfg: ExperimentConfig, data_dir, out_dir, resume=None) -> Path:
    out_dir = _ensure_dir(out_dir)
    _write_resolved(cfg, out_dir)
    videos, manifest = load_dataset(data_dir)
    if manifest["kind"] != cfg.dataset.kind:
        raise ConfigurationError(
            f"dataset at {data_dir} is {manifest['kind']!r}, config says {cfg.dataset.kind!r}"
        )
    start_model = start_state = None
    start_iteration = 0
    if resume is not None:
        start_model, start_state, meta = load_checkpoint(resume)
        if meta.get("config_hash") != config_hash(cfg):
            raise ConfigurationError(
                f"checkpoint {resume} was trained under config hash "
                f"{meta.get('config_hash')}, current is {config_hash(cfg)}"
            )
        start_iteration = int(meta.get("iterations_done", 0))
    result = train_model(
        cfg,
        videos,
        manifest["train_ids"],
        out_dir=str(out_dir),
        start_model=start_model,
        start_state=start_state,
        start_iteration=start_iteration,
        dataset_id=manifest["kind"],
    )
    with open(out_dir / "loss_curve.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "loss"])
        for it, loss in result.history:
            writer.writerow([it, repr(loss)])
    return out_dir / "checkpoint.bfck"


# ---------------------------------------------------------------------------
# rollout
# ---------------------------------------------------------------------------


def _pick_initial_frames(videos, test_ids, n_rollouts, seed):
    """Random (video, frame) starting points from the test split."""
    rng = np.random.default_rng([seed, 0xF0])
    picks = []
    for _ in range(n_rollouts):
        vid = int(test_ids[rng.integers(0, len(test_ids))])
        frame = int(rng.integers(0, videos[vid].num_frames))
        picks.append((vid, frame))
    return picks


def _fresh_model(model: FieldModel) -> FieldModel:
    # per-task copy: params are shared read-only, eval_count stays private
    return FieldModel(model.kind, model.frame_dim, model.net, model.params)


def _run_group(cfg, model, videos, manifest, epsilon, out_dir, backward, jobs):
    out_dir = _ensure_dir(out_dir)
    ev, samp = cfg.evaluation, cfg.sampling
    picks = _pick_initial_frames(videos, manifest["test_ids"], ev.n_rollouts, ev.seed)
    roll_seeds = np.random.SeedSequence([samp.seed, 1 if backward else 0]).generate_state(ev.n_rollouts)
    shape = (manifest["channels"], manifest["height"], manifest["width"])
    if model.kind == "biflow" and not backward:
        pattern = "joint" if samp.pattern == "auto" else samp.pattern
    else:
        pattern = None

    def one(i):
        vid, fidx = picks[i]
        start = videos[vid].flat[fidx]
        spec = cfg.solve_spec()
        m = _fresh_model(model)
        seed = int(roll_seeds[i])
        if backward:
            r = rollout_backward(
                m, start, ev.rollout_frames, epsilon, spec, seed=seed,
                frame_shape=shape, origin=(manifest["kind"], vid, fidx),
            )
        else:
            curve = CharacteristicCurve(samp.curve, epsilon if model.kind == "biflow" else 0.0)
            r = rollout(
                m, start, ev.rollout_frames, spec, curve=curve, seed=seed,
                frame_shape=shape, origin=(manifest["kind"], vid, fidx), pattern=pattern,
            )
        return i, r

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(one, range(ev.n_rollouts)))
    else:
        results = [one(i) for i in range(ev.n_rollouts)]
    results.sort(key=lambda t: t[0])
    for i, r in results:
        export_rollout(r, out_dir / f"roll_{i:03d}.bfv")

    solver_desc = cfg.solve_spec()
    group = {
        "method": model.kind,
        "pattern": "backward" if backward else (pattern or model.kind),
        "direction": "backward" if backward else "forward",
        "epsilon": repr(float(epsilon)),
        "curve": samp.curve,
        "solver": solver_desc.method,
        "atol": repr(solver_desc.atol),
        "rtol": repr(solver_desc.rtol),
        "step_size": repr(solver_desc.step_size),
        "n_rollouts": str(ev.n_rollouts),
        "n_frames": str(ev.rollout_frames),
        "dataset_kind": manifest["kind"],
        "frame_shape": ",".join(str(v) for v in shape),
        "seed": str(samp.seed),
        "config_hash": config_hash(cfg),
    }
    (out_dir / "group.txt").write_text("".join(f"{k} = {v}\n" for k, v in group.items()))
    return out_dir


def cmd_rollout(cfg: ExperimentConfig, checkpoint, data_dir, out_dir, backward=False, jobs=1):
    """Emit one rollout group per noise level (a single group for flow/condiff)."""
    out_dir = _ensure_dir(out_dir)
    _write_resolved(cfg, out_dir)
    model, _, meta = load_checkpoint(checkpoint)
    videos, manifest = load_dataset(data_dir)
    if model.frame_dim != videos[0].frame_dim:
        raise ConfigurationError(
            f"checkpoint frame_dim {model.frame_dim} does not match dataset {videos[0].frame_dim}"
        )
    if backward and model.kind != "biflow":
        raise ConfigurationError(
            f"backward solving needs the joint field; a {model.kind} model has no reverted flow"
        )
    if model.kind == "biflow" and cfg.sampling.pattern == "stream" and not backward:
        epsilons = [0.0]
    elif model.kind == "biflow":
        epsilons = list(cfg.sampling.epsilon_list)
    else:
        epsilons = [0.0]
    groups = []
    prefix = "backward_" if backward else ""
    for eps in epsilons:
        name = f"{prefix}{model.kind}"
        if model.kind == "biflow":
            name += f"_eps_{eps:g}"
        groups.append(_run_group(cfg, model, videos, manifest, eps, out_dir / name, backward, jobs))
    return groups


# ---------------------------------------------------------------------------
# evaluate
# ---------------------------------------------------------------------------


def _load_group(group_dir):
    group_dir = Path(group_dir)
    meta_path = group_dir / "group.txt"
    if not meta_path.exists():
        raise FormatError(f"no group.txt in {group_dir}")
    info = _parse_kv(meta_path.read_text())
    rolls = []
    for bfv in sorted(group_dir.glob("roll_*.bfv")):
        video = read_frames(bfv)
        sidecar = _parse_kv(Path(str(bfv) + ".meta.txt").read_text())
        steps = [int(s) for s in sidecar["per_frame_steps"].split(",") if s]
        rolls.append((video, steps))
    if not rolls:
        raise FormatError(f"no rollouts in {group_dir}")
    return info, rolls


def cmd_evaluate(cfg: ExperimentConfig, rollout_dirs, data_dir, out_dir) -> Path:
    out_dir = _ensure_dir(out_dir)
    _write_resolved(cfg, out_dir)
    videos, manifest = load_dataset(data_dir)
    kind = manifest["kind"]
    shape = (manifest["channels"], manifest["height"], manifest["width"])
    ref = reference_stats([videos[i] for i in manifest["test_ids"]], kind, shape)
    ev = cfg.evaluation

    window_rows = []
    summary_rows = []
    for group_dir in rollout_dirs:
        info, rolls = _load_group(group_dir)
        frames = [video.flat for video, _ in rolls]
        n_frames = max(f.shape[0] for f in frames)
        diverged = sum(1 for f in frames if f.shape[0] < n_frames)
        if n_frames < ev.window:
            raise ConfigurationError(
                f"group {group_dir}: rollouts have {n_frames} frames, window is {ev.window}"
            )
        series = sliding_fvd(
            frames, None, window=ev.window, stride=ev.stride,
            dataset_kind=kind, frame_shape=shape, ref_stats=ref,
        )
        slope, intercept = drift_slope(series)
        steps = aggregate_steps([s for _, s in rolls])
        eps = float(info.get("epsilon", "0.0"))
        direction = info.get("direction", "forward")
        for start, dist in series.values:
            window_rows.append(
                {
                    "method": info["method"],
                    "epsilon": eps,
                    "direction": direction,
                    "window_start": start,
                    "distance": dist,
                }
            )
        summary_rows.append(
            {
                "method": info["method"],
                "epsilon": eps,
                "direction": direction,
                "mean_distance": series.mean_distance,
                "slope": slope,
                "intercept": intercept,
                "mean_steps": steps,
                "n_rollouts": len(rolls),
                "n_frames": n_frames,
                "diverged": diverged,
                "window": ev.window,
                "stride": ev.stride,
            }
        )

    summary_rows.sort(key=lambda r: (r["method"], r["direction"], r["epsilon"]))
    window_rows.sort(key=lambda r: (r["method"], r["direction"], r["epsilon"], r["window_start"]))
    # flag the noise level with the lowest mean distance within each method
    best_keys = {}
    for row in summary_rows:
        key = (row["method"], row["direction"])
        if key not in best_keys or row["mean_distance"] < best_keys[key][1]:
            best_keys[key] = (row["epsilon"], row["mean_distance"])
    for row in summary_rows:
        row["best"] = int(best_keys[(row["method"], row["direction"])][0] == row["epsilon"])

    _write_windows_csv(out_dir / "windows.csv", window_rows)
    _write_summary_csv(out_dir / "summary.csv", summary_rows)
    with open(out_dir / "summary.txt", "w") as fh:
        for row in summary_rows:
            fh.write(
                f"method={row['method']} epsilon={row['epsilon']!r} direction={row['direction']} "
                f"mean_distance={row['mean_distance']!r} slope={row['slope']!r} "
                f"mean_steps={row['mean_steps']!r} best={row['best']}\n"
            )
    return out_dir / "summary.csv"


_SUMMARY_COLS = [
    "method", "epsilon", "direction", "mean_distance", "slope", "intercept",
    "mean_steps", "n_rollouts", "n_frames", "diverged", "window", "stride", "best",
]
_WINDOW_COLS = ["method", "epsilon", "direction", "window_start", "distance"]


def _fmt(value):
    return repr(value) if isinstance(value, float) else str(value)


def _write_summary_csv(path, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_SUMMARY_COLS)
        for row in rows:
            writer.writerow([_fmt(row[c]) for c in _SUMMARY_COLS])


def _write_windows_csv(path, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_WINDOW_COLS)
        for row in rows:
            writer.writerow([_fmt(row[c]) for c in _WINDOW_COLS])


def _read_csv_rows(path, float_cols):
    rows = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            for col in float_cols:
                if col in row:
                    row[col] = float(row[col])
            rows.append(row)
    return rows


# ---------------------------------------------------------------------------
# plot
# ---------------------------------------------------------------------------


def cmd_plot(eval_dirs, out_dir) -> None:
    """Scatter + trend SVGs from one or more evaluation directories."""
    from . import plots

    out_dir = _ensure_dir(out_dir)
    if not eval_dirs:
        raise ConfigurationError("no evaluation directories given")
    summary_rows, window_rows = [], []
    for d in eval_dirs:
        d = Path(d)
        if not (d / "summary.csv").exists():
            raise FormatError(f"no summary.csv in {d}")
        summary_rows += _read_csv_rows(
            d / "summary.csv", ["epsilon", "mean_distance", "slope", "intercept", "mean_steps"]
        )
        window_rows += _read_csv_rows(d / "windows.csv", ["epsilon", "window_start", "distance"])
    plots.scatter_steps_vs_distance(summary_rows, out_dir / "scatter.svg")
    plots.trend_lines(window_rows, out_dir / "trend.svg")
    # re-emit the evaluation CSV content alongside the figures
    for row in window_rows:
        row["window_start"] = int(row["window_start"])
    _write_summary_csv(out_dir / "summary.csv", [_floatify_summary(r) for r in summary_rows])
    _write_windows_csv(out_dir / "windows.csv", window_rows)


def _floatify_summary(row):
    out = dict(row)
    for col in ("n_rollouts", "n_frames", "diverged", "window", "stride", "best"):
        out[col] = int(float(out[col]))
    return out


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------


def cmd_sweep(cfg: ExperimentConfig, out_dir, jobs: int = 1) -> Path:
    """Full grid: data, the three methods, rollouts per noise level, metrics, plots."""
    from dataclasses import replace

    out_dir = _ensure_dir(out_dir)
    _write_resolved(cfg, out_dir)
    data_dir = cmd_gen_data(cfg, out_dir / "data")
    group_dirs = []
    for method in ("flow", "biflow", "condiff"):
        mcfg = ExperimentConfig(
            dataset=cfg.dataset,
            model=replace(cfg.model, loss=method),
            training=cfg.training,
            sampling=cfg.sampling,
            evaluation=cfg.evaluation,
        )
        ckpt = cmd_train(mcfg, data_dir, out_dir / f"train_{method}")
        group_dirs += cmd_rollout(mcfg, ckpt, data_dir, out_dir / "rollouts", jobs=jobs)
    eval_dir = _ensure_dir(out_dir / "eval")
    cmd_evaluate(cfg, group_dirs, data_dir, eval_dir)
    cmd_plot([eval_dir], out_dir / "plots")
    return out_dir


# ---------------------------------------------------------------------------
# argument parsing and dispatch
# ---------------------------------------------------------------------------


def _add_common(parser, config=True, out=True):
    if config:
        parser.add_argument("--config", type=str, default=None, help="config file (key = value)")
    parser.add_argument("--seed", type=int, default=None, help="override every block seed")
    parser.add_argument("--jobs", type=int, default=1, help="worker threads for rollouts")
    parser.add_argument(
        "--deterministic", action="store_true",
        help="force single-threaded, ordered reductions",
    )
    if out:
        parser.add_argument("--out", type=str, required=True, help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="biflow", description=__doc__)
    parser.add_argument("--version", action="version", version=f"biflow {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate a synthetic dataset")
    _add_common(p)

    p = sub.add_parser("train", help="train one method on a dataset")
    _add_common(p)
    p.add_argument("--data", type=str, required=True)
    p.add_argument("--resume", type=str, default=None, help="checkpoint to continue from")

    p = sub.add_parser("rollout", help="generate rollouts from a checkpoint")
    _add_common(p)
    p.add_argument("--data", type=str, required=True)
    p.add_argument("--checkpoint", type=str, required=True)
    p.add_argument("--backward", action="store_true", help="solve the reverted flow")

    p = sub.add_parser("evaluate", help="metrics for rollout groups")
    _add_common(p)
    p.add_argument("--data", type=str, required=True)
    p.add_argument("rollout_dirs", nargs="+")

    p = sub.add_parser("plot", help="figures from evaluation output")
    _add_common(p, config=False)
    p.add_argument("eval_dirs", nargs="+")

    p = sub.add_parser("sweep", help="full method x noise grid end to end")
    _add_common(p)
    return parser


def _load_cfg(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    if args.seed is not None:
        cfg.dataset.seed = args.seed
        cfg.model.init_seed = args.seed + 1
        cfg.training.seed = args.seed + 2
        cfg.sampling.seed = args.seed + 3
        cfg.evaluation.seed = args.seed + 4
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    jobs = 1 if getattr(args, "deterministic", False) else max(1, getattr(args, "jobs", 1))
    try:
        if args.command == "gen-data":
            cmd_gen_data(_load_cfg(args), args.out)
        elif args.command == "train":
            path = cmd_train(_load_cfg(args), args.data, args.out, resume=args.resume)
            print(path)
        elif args.command == "rollout":
            for group in cmd_rollout(
                _load_cfg(args), args.checkpoint, args.data, args.out,
                backward=args.backward, jobs=jobs,
            ):
                print(group)
        elif args.command == "evaluate":
            print(cmd_evaluate(_load_cfg(args), args.rollout_dirs, args.data, args.out))
        elif args.command == "plot":
            cmd_plot(args.eval_dirs, args.out)
        elif args.command == "sweep":
            cmd_sweep(_load_cfg(args), args.out, jobs=jobs)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except (DivergenceError, TrainingError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3
    except (FormatError, OSError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 4
    return 0


if __name__ == "__main__":
    sys.exit(main())
