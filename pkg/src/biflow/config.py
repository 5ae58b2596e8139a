"""Experiment configuration: a flat `section.key = value` text format.

The format is deliberately plain so diffs stay reviewable and parsing
needs nothing beyond the standard library.  `#` starts a comment, blank
lines are ignored, and every key must exist in the schema below.  A
canonical serialization of the resolved config doubles as the basis for
the config hash recorded in checkpoints and run directories.
"""

from __future__ import annotations

import hashlib
from dataclasses import asdict, dataclass, field, fields, replace

from .errors import ConfigurationError
from .solvers import SolveSpec


@dataclass
class DatasetConfig:
    kind: str = "orbit"  # orbit | bounce
    n_videos: int = 64
    n_frames: int = 80
    seed: int = 0
    train_fraction: float = 0.8
    # orbit knobs
    dim: int = 8
    angular_speed: float = 0.4
    process_noise: float = 0.01
    radius_min: float = 0.35
    radius_max: float = 0.85
    # bounce knobs
    height: int = 8
    width: int = 8
    blob_sigma: float = 1.3
    speed: float = 1.0


@dataclass
class ModelConfig:
    loss: str = "biflow"  # flow | biflow | condiff
    hidden_dims: tuple[int, ...] = (256, 256, 256)
    activation: str = "silu"
    coord_embedding: str = "sinusoidal"
    n_frequencies: int = 4
    alpha_max: float = 1.0
    init_seed: int = 1
    v_weight: float = 1.0
    n_weight: float = 1.0


@dataclass
class TrainingConfig:
    iterations: int = 6000
    batch_size: int = 128
    learning_rate: float = 1e-3
    lr_schedule: str = "cosine"  # constant | cosine
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 2
    log_every: int = 100
    checkpoint_every: int = 2000


@dataclass
class SamplingConfig:
    pattern: str = "auto"  # auto | stream | joint
    curve: str = "linear"  # linear | solve_then_denoise | denoise_then_solve
    epsilon_list: tuple[float, ...] = (0.0, 0.1, 0.2, 0.3)
    solver: str = "heun_adaptive"  # heun_adaptive | euler_fixed
    atol: float = 1e-2
    rtol: float = 1e-2
    step_size: float = 0.05
    initial_step: float = 0.1
    min_step: float = 1e-4
    max_step: float = 1.0
    direction: str = "forward"  # forward | backward
    seed: int = 3


@dataclass
class EvaluationConfig:
    n_rollouts: int = 64
    rollout_frames: int = 200
    window: int = 32
    stride: int = 16
    seed: int = 4


@dataclass
class ExperimentConfig:
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    training: TrainingConfig = field(default_factory=TrainingConfig)
    sampling: SamplingConfig = field(default_factory=SamplingConfig)
    evaluation: EvaluationConfig = field(default_factory=EvaluationConfig)

    def solve_spec(self, direction: str | None = None) -> SolveSpec:
        s = self.sampling
        return SolveSpec(
            method=s.solver,
            direction=direction or s.direction,
            step_size=s.step_size,
            atol=s.atol,
            rtol=s.rtol,
            initial_step=s.initial_step,
            min_step=s.min_step,
            max_step=s.max_step,
        )


_BLOCKS = {
    "dataset": DatasetConfig,
    "model": ModelConfig,
    "training": TrainingConfig,
    "sampling": SamplingConfig,
    "evaluation": EvaluationConfig,
}


def _coerce(raw: str, current, key: str):
    raw = raw.strip()
    if isinstance(current, bool):
        if raw.lower() in ("true", "1", "yes"):
            return True
        if raw.lower() in ("false", "0", "no"):
            return False
        raise ConfigurationError(f"{key}: expected a boolean, got {raw!r}")
    if isinstance(current, int):
        try:
            return int(raw)
        except ValueError as exc:
            raise ConfigurationError(f"{key}: expected an integer, got {raw!r}") from exc
    if isinstance(current, float):
        try:
            return float(raw)
        except ValueError as exc:
            raise ConfigurationError(f"{key}: expected a number, got {raw!r}") from exc
    if isinstance(current, tuple):
        if not raw:
            return ()
        items = [p.strip() for p in raw.split(",") if p.strip()]
        elem = current[0] if current else 0.0
        try:
            return tuple(type(elem)(p) for p in items)
        except ValueError as exc:
            raise ConfigurationError(f"{key}: expected a comma list, got {raw!r}") from exc
    return raw


def parse_config(text: str) -> ExperimentConfig:
    """Parse the key-value format over the defaults; unknown keys are errors."""
    cfg = ExperimentConfig()
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigurationError(f"line {lineno}: expected 'section.key = value'")
        key, raw = (p.strip() for p in stripped.split("=", 1))
        if "." not in key:
            raise ConfigurationError(f"line {lineno}: key {key!r} is missing its section")
        section, name = key.split(".", 1)
        if section not in _BLOCKS:
            raise ConfigurationError(f"line {lineno}: unknown section {section!r}")
        block = getattr(cfg, section)
        if not hasattr(block, name) or name.startswith("_"):
            raise ConfigurationError(f"line {lineno}: unknown key {key!r}")
        setattr(block, name, _coerce(raw, getattr(block, name), key))
    validate_config(cfg)
    return cfg


def load_config(path) -> ExperimentConfig:
    with open(path) as fh:
        return parse_config(fh.read())


def format_config(cfg: ExperimentConfig) -> str:
    """Canonical resolved form: every key, sorted, full float precision."""
    lines = []
    for section in sorted(_BLOCKS):
        block = getattr(cfg, section)
        for f in sorted(fields(block), key=lambda f: f.name):
            value = getattr(block, f.name)
            if isinstance(value, tuple):
                rendered = ", ".join(repr(v) for v in value)
            else:
                rendered = repr(value) if isinstance(value, float) else str(value)
            lines.append(f"{section}.{f.name} = {rendered}")
    return "\n".join(lines) + "\n"


def config_hash(cfg: ExperimentConfig) -> str:
    return hashlib.sha256(format_config(cfg).encode("utf-8")).hexdigest()[:16]


def validate_config(cfg: ExperimentConfig) -> None:
    if cfg.dataset.kind not in ("orbit", "bounce"):
        raise ConfigurationError(f"dataset.kind must be orbit or bounce, got {cfg.dataset.kind!r}")
    if cfg.model.loss not in ("flow", "biflow", "condiff"):
        raise ConfigurationError(f"model.loss must be flow, biflow or condiff, got {cfg.model.loss!r}")
    if cfg.model.alpha_max <= 0.0:
        raise ConfigurationError("model.alpha_max must be positive")
    if any(e < 0.0 for e in cfg.sampling.epsilon_list):
        raise ConfigurationError("sampling.epsilon_list entries must be non-negative")
    if cfg.sampling.pattern not in ("auto", "stream", "joint"):
        raise ConfigurationError(f"unknown sampling.pattern {cfg.sampling.pattern!r}")
    if cfg.training.lr_schedule not in ("constant", "cosine"):
        raise ConfigurationError(f"unknown training.lr_schedule {cfg.training.lr_schedule!r}")
    if cfg.evaluation.window <= 0 or cfg.evaluation.stride <= 0:
        raise ConfigurationError("evaluation.window and evaluation.stride must be positive")
    if cfg.evaluation.rollout_frames < cfg.evaluation.window:
        raise ConfigurationError("evaluation.rollout_frames must cover at least one window")
    # the solver block is validated by SolveSpec itself
    cfg.solve_spec()


def frame_dim(cfg: ExperimentConfig) -> int:
    if cfg.dataset.kind == "orbit":
        return cfg.dataset.dim
    return cfg.dataset.height * cfg.dataset.width


def frame_shape(cfg: ExperimentConfig) -> tuple[int, int, int]:
    if cfg.dataset.kind == "orbit":
        return (1, 1, cfg.dataset.dim)
    return (1, cfg.dataset.height, cfg.dataset.width)
