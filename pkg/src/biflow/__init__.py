"""Streaming video generation with a joint temporal-advance / denoising flow.

The package trains a single field with two output branches on consecutive
frame pairs: one branch advances a frame in time, the other removes
injected noise.  Sampling solves the field along characteristic curves in
the (time, noise) plane, forward or backward, and the metrics quantify
drift and solver cost against held-out data.
"""

__version__ = "0.1.0"

from .config import ExperimentConfig, load_config, parse_config
from .data import PairSampler, VideoTensor, gen_bounce, gen_orbit, read_frames, sample_pairs, write_frames
from .errors import BiflowError, ConfigurationError, DivergenceError, FormatError, TrainingError
from .fields import FieldModel, build_net_spec, init_model
from .metrics import (
    FrechetWindowSeries,
    GaussianStats,
    aggregate_steps,
    drift_slope,
    features,
    frechet_distance,
    gaussian_stats,
    sliding_fvd,
)
from .nn import AdamState, NetSpec, adam_init, adam_step, backward, forward, init_params
from .objectives import bilinear_interp, loss_biflow, loss_condiff, loss_flow_matching, loss_video_flow
from .sampling import (
    CharacteristicCurve,
    Rollout,
    denoise,
    export_rollout,
    joint_field_eval,
    joint_next,
    rollout,
    rollout_backward,
    stream_next,
)
from .solvers import SolveSpec, heun_adaptive_step, solve
from .checkpoint import load_checkpoint, save_checkpoint
from .train import TrainResult, train_model

__all__ = [
    "AdamState",
    "BiflowError",
    "CharacteristicCurve",
    "ConfigurationError",
    "DivergenceError",
    "ExperimentConfig",
    "FieldModel",
    "FormatError",
    "FrechetWindowSeries",
    "GaussianStats",
    "NetSpec",
    "PairSampler",
    "Rollout",
    "SolveSpec",
    "TrainingError",
    "TrainResult",
    "VideoTensor",
    "adam_init",
    "adam_step",
    "aggregate_steps",
    "backward",
    "bilinear_interp",
    "build_net_spec",
    "denoise",
    "drift_slope",
    "export_rollout",
    "features",
    "forward",
    "frechet_distance",
    "gaussian_stats",
    "gen_bounce",
    "gen_orbit",
    "heun_adaptive_step",
    "init_model",
    "init_params",
    "joint_field_eval",
    "joint_next",
    "load_checkpoint",
    "load_config",
    "loss_biflow",
    "loss_condiff",
    "loss_flow_matching",
    "loss_video_flow",
    "parse_config",
    "read_frames",
    "rollout",
    "rollout_backward",
    "sample_pairs",
    "save_checkpoint",
    "sliding_fvd",
    "solve",
    "stream_next",
    "train_model",
    "write_frames",
]
