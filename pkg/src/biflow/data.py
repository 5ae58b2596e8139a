"""Synthetic video datasets, the BFV1 frame format, and consecutive-pair sampling.

Two dataset families:

* ``orbit``  -- low-dimensional states rotating in coordinate planes with
  additive process noise; smooth, well-posed dynamics.
* ``bounce`` -- a Gaussian blob bouncing inside a pixel grid with a random
  velocity direction per video; the direction is not observable from a
  single frame, so next-frame prediction is ambiguous by construction.

Frames are held in memory as float64 and stored on disk as float32.
Generated frames always lie in [-1, 1].
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, FormatError

FRAME_MAGIC = b"BFV1"
DATASET_KINDS = ("orbit", "bounce")


@dataclass
class VideoTensor:
    """One video: frames of shape (num_frames, channels, height, width)."""

    frames: np.ndarray

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=np.float64)
        if self.frames.ndim != 4:
            raise ConfigurationError(f"frames must be 4-d, got shape {self.frames.shape}")

    @property
    def num_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def frame_shape(self) -> tuple[int, int, int]:
        return self.frames.shape[1:]

    @property
    def frame_dim(self) -> int:
        c, h, w = self.frame_shape
        return c * h * w

    @property
    def flat(self) -> np.ndarray:
        """(num_frames, frame_dim) view of the frames."""
        return self.frames.reshape(self.num_frames, -1)


# ---------------------------------------------------------------------------
# orbit dataset
# ---------------------------------------------------------------------------


def rotation_matrix(dim: int, angle: float) -> np.ndarray:
    """Block rotation acting on consecutive coordinate pairs."""
    if dim % 2 != 0:
        raise ConfigurationError(f"orbit dim must be even, got {dim}")
    rot = np.zeros((dim, dim))
    c, s = np.cos(angle), np.sin(angle)
    for j in range(0, dim, 2):
        rot[j, j] = c
        rot[j, j + 1] = -s
        rot[j + 1, j] = s
        rot[j + 1, j + 1] = c
    return rot


def orbit_trajectory(
    init_state: np.ndarray,
    n_frames: int,
    angular_speed: float,
    process_noise: float,
    rng: np.random.Generator,
) -> np.ndarray:
    """Roll the orbit recurrence s_{k+1} = clip(R s_k + sigma * xi, -1, 1).

    Frame 0 is the initial state itself; the clip keeps frames inside the
    normalized range even under the noise random walk.
    """
    state = np.clip(np.asarray(init_state, dtype=np.float64), -1.0, 1.0)
    rot = rotation_matrix(state.size, angular_speed)
    frames = np.empty((n_frames, state.size))
    frames[0] = state
    for k in range(1, n_frames):
        state = rot @ state
        if process_noise > 0.0:
            state = state + process_noise * rng.standard_normal(state.size)
        state = np.clip(state, -1.0, 1.0)
        frames[k] = state
    return frames


def gen_orbit(
    n_videos: int,
    n_frames: int,
    dim: int,
    angular_speed: float = 0.4,
    process_noise: float = 0.01,
    seed: int = 0,
    radius_range: tuple[float, float] = (0.35, 0.85),
) -> list[VideoTensor]:
    """Orbit videos as (n_frames, 1, 1, dim) tensors, deterministic under seed."""
    if dim % 2 != 0:
        raise ConfigurationError(f"orbit dim must be even, got {dim}")
    if n_frames < 2:
        raise ConfigurationError("videos need at least 2 frames")
    rng = np.random.default_rng(seed)
    lo, hi = radius_range
    videos = []
    for _ in range(n_videos):
        init = np.empty(dim)
        for j in range(0, dim, 2):
            r = rng.uniform(lo, hi)
            phi = rng.uniform(0.0, 2.0 * np.pi)
            init[j] = r * np.cos(phi)
            init[j + 1] = r * np.sin(phi)
        traj = orbit_trajectory(init, n_frames, angular_speed, process_noise, rng)
        videos.append(VideoTensor(traj.reshape(n_frames, 1, 1, dim)))
    return videos


# ---------------------------------------------------------------------------
# bounce dataset
# ---------------------------------------------------------------------------


def fold_position(q: np.ndarray, extent: float) -> np.ndarray:
    """Reflect unbounded linear motion into [0, extent] (period-2L unfolding)."""
    m = np.mod(q, 2.0 * extent)
    return np.where(m <= extent, m, 2.0 * extent - m)


def render_blob(position, height: int, width: int, sigma: float) -> np.ndarray:
    """Gaussian blob at (row, col) mapped to [-1, 1]; background is -1."""
    py, px = position
    ys = np.arange(height, dtype=np.float64)[:, None]
    xs = np.arange(width, dtype=np.float64)[None, :]
    d2 = (ys - py) ** 2 + (xs - px) ** 2
    return 2.0 * np.exp(-d2 / (2.0 * sigma * sigma)) - 1.0


def bounce_trajectory(
    p0: np.ndarray, v0: np.ndarray, n_frames: int, height: int, width: int
) -> np.ndarray:
    """Stepwise elastic reflection of a point in [0, h-1] x [0, w-1]."""
    extents = np.array([height - 1.0, width - 1.0])
    p = np.asarray(p0, dtype=np.float64).copy()
    v = np.asarray(v0, dtype=np.float64).copy()
    positions = np.empty((n_frames, 2))
    positions[0] = p
    for k in range(1, n_frames):
        p = p + v
        for ax in range(2):
            # a step may cross a wall at most a few times; reflect until inside
            while p[ax] < 0.0 or p[ax] > extents[ax]:
                if p[ax] < 0.0:
                    p[ax] = -p[ax]
                else:
                    p[ax] = 2.0 * extents[ax] - p[ax]
                v[ax] = -v[ax]
        positions[k] = p
    return positions


def gen_bounce(
    n_videos: int,
    n_frames: int,
    grid: tuple[int, int] = (8, 8),
    blob_sigma: float = 1.3,
    speed: float = 1.0,
    seed: int = 0,
) -> list[VideoTensor]:
    """Bouncing-blob videos as (n_frames, 1, h, w) tensors in [-1, 1]."""
    h, w = grid
    if h < 8 or w < 8:
        raise ConfigurationError(f"grid must be at least 8x8, got {h}x{w}")
    if blob_sigma <= 0.0:
        raise ConfigurationError("blob_sigma must be positive")
    if not 0.0 < speed < min(h, w) / 2.0:
        raise ConfigurationError(f"speed must be in (0, {min(h, w) / 2.0}), got {speed}")
    if n_frames < 2:
        raise ConfigurationError("videos need at least 2 frames")
    rng = np.random.default_rng(seed)
    videos = []
    for _ in range(n_videos):
        p0 = np.array([rng.uniform(0.0, h - 1.0), rng.uniform(0.0, w - 1.0)])
        phi = rng.uniform(0.0, 2.0 * np.pi)
        v0 = speed * np.array([np.sin(phi), np.cos(phi)])
        positions = bounce_trajectory(p0, v0, n_frames, h, w)
        frames = np.stack([render_blob(p, h, w, blob_sigma) for p in positions])
        videos.append(VideoTensor(frames.reshape(n_frames, 1, h, w)))
    return videos


# ---------------------------------------------------------------------------
# BFV1 binary frame format
# ---------------------------------------------------------------------------

_HEADER = struct.Struct("<4sIIII")
_MAX_ELEMENTS = 2**31  # guards against absurd headers before allocating


def write_frames(path, video: VideoTensor) -> None:
    """Write one video: magic, u32 dims, float32 little-endian payload."""
    n, (c, h, w) = video.num_frames, video.frame_shape
    payload = np.ascontiguousarray(video.frames, dtype="<f4").tobytes()
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(FRAME_MAGIC, n, c, h, w))
        fh.write(payload)


def read_frames(path) -> VideoTensor:
    """Read a BFV1 file back into a float64 VideoTensor."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        raise FormatError(
            f"truncated header: need {_HEADER.size} bytes, found {len(raw)}", offset=len(raw)
        )
    magic, n, c, h, w = _HEADER.unpack_from(raw)
    if magic != FRAME_MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {FRAME_MAGIC!r}", offset=0)
    count = n * c * h * w
    if count <= 0 or count > _MAX_ELEMENTS:
        raise FormatError(f"header declares {count} elements", offset=4)
    expected = count * 4
    actual = len(raw) - _HEADER.size
    if actual != expected:
        raise FormatError(
            f"payload holds {actual} bytes, header expects {expected}",
            offset=_HEADER.size + min(actual, expected),
        )
    data = np.frombuffer(raw, dtype="<f4", offset=_HEADER.size).astype(np.float64)
    return VideoTensor(data.reshape(n, c, h, w))


# ---------------------------------------------------------------------------
# splits and pair sampling
# ---------------------------------------------------------------------------


def split_videos(n_videos: int, train_fraction: float = 0.8, seed: int = 0):
    """Seeded shuffle split over whole videos; returns (train_ids, test_ids)."""
    if not 0.0 < train_fraction < 1.0:
        raise ConfigurationError("train_fraction must be in (0, 1)")
    perm = np.random.default_rng([seed, 0x5911]).permutation(n_videos)
    n_train = int(round(n_videos * train_fraction))
    n_train = min(max(n_train, 1), n_videos - 1)
    return sorted(perm[:n_train].tolist()), sorted(perm[n_train:].tolist())


@dataclass
class PairSampler:
    """Uniform sampler over all consecutive-frame positions of one split."""

    videos: list[VideoTensor]
    video_ids: list[int]
    seed: int = 0
    split: str = "train"

    def __post_init__(self):
        if not self.video_ids:
            raise ConfigurationError(f"{self.split} split is empty")
        for vid in self.video_ids:
            if self.videos[vid].num_frames < 2:
                raise ConfigurationError(f"video {vid} has fewer than 2 frames")
        self._positions = np.array(
            [(vid, i) for vid in self.video_ids for i in range(self.videos[vid].num_frames - 1)]
        )
        self._rng = np.random.default_rng([self.seed, len(self._positions)])

    @property
    def n_positions(self) -> int:
        return len(self._positions)

    def sample_indices(self, batch: int, rng=None) -> np.ndarray:
        """(batch, 2) array of (video id, frame index) positions."""
        rng = self._rng if rng is None else rng
        picks = rng.integers(0, len(self._positions), size=batch)
        return self._positions[picks]


def sample_pairs(sampler: PairSampler, batch: int, rng=None):
    """Draw a batch of consecutive pairs; returns (x0, x1) as (batch, frame_dim)."""
    idx = sampler.sample_indices(batch, rng)
    dim = sampler.videos[sampler.video_ids[0]].frame_dim
    x0 = np.empty((batch, dim))
    x1 = np.empty((batch, dim))
    for row, (vid, i) in enumerate(idx):
        flat = sampler.videos[vid].flat
        x0[row] = flat[i]
        x1[row] = flat[i + 1]
    return x0, x1
