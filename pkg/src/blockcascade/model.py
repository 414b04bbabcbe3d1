"""Per-location diagonal Gaussian background model.

A :class:`BackgroundModel` keeps one Gaussian per block anchor as rows of
flat arrays so the frame kernels can sweep all anchors at once.
:class:`BlockModel` is the single-anchor view used by the reference
(scalar) cascade and by tests.
"""
from dataclasses import dataclass, field
import json
import math

import numpy as np

from . import kernels
from .config import Config
from .descriptor import describe_frame, make_grid, DESCRIPTOR_DIM

__all__ = [
    "BlockModel",
    "BackgroundModel",
    "TrainingError",
    "ParameterError",
    "ModelFormatError",
    "fit_robust",
    "train",
    "log_likelihood",
    "log_threshold",
    "stage1_classify",
    "adapt",
    "save_model",
    "load_model",
    "BACKGROUND",
    "FOREGROUND",
    "UNDECIDED",
    "UNSET",
]

BACKGROUND = "background"
FOREGROUND = "foreground"
UNDECIDED = "undecided"
UNSET = "unset"

_LABEL_CODE = {BACKGROUND: kernels.BG, FOREGROUND: kernels.FG, UNSET: kernels.UNSET}
_CODE_LABEL = {v: k for k, v in _LABEL_CODE.items()}

MODEL_FORMAT = "blockcascade-model"
MODEL_VERSION = 1

# anchor rows per training band; bounds memory at T x band x cols x 12 floats
_BAND_ROWS = 8


class TrainingError(ValueError):
    pass


class ParameterError(ValueError):
    pass


class ModelFormatError(ValueError):
    pass


@dataclass
class BlockModel:
    mu: np.ndarray
    var: np.ndarray
    log_threshold: float
    prev_descriptor: np.ndarray = field(default_factory=lambda: np.zeros(DESCRIPTOR_DIM))
    prev_label: str = UNSET

    @classmethod
    def from_moments(cls, mu, var, variance_floor=1e-4):
        mu = np.asarray(mu, dtype=np.float64).copy()
        var = np.maximum(np.asarray(var, dtype=np.float64), variance_floor)
        return cls(mu=mu, var=var, log_threshold=log_threshold(mu, var))


def log_likelihood(model, d):
    """Log density of ``d`` under the block's diagonal Gaussian."""
    return _log_pdf(model.mu, model.var, np.asarray(d, dtype=np.float64))


def _log_pdf(mu, var, d):
    diff = d - mu
    return float(-0.5 * np.sum(diff * diff / var)
                 - 0.5 * mu.size * math.log(2.0 * math.pi)
                 - 0.5 * np.sum(np.log(var)))


def log_threshold(mu, var):
    """Log density at the point two standard deviations above the mean."""
    return _log_pdf(mu, var, mu + 2.0 * np.sqrt(var))


def stage1_classify(model, d):
    if log_likelihood(model, d) >= model.log_threshold:
        return BACKGROUND
    return UNDECIDED


def adapt(model, d, rho, variance_floor=1e-4):
    """Return a copy of ``model`` pulled toward ``d`` at learning rate ``rho``."""
    if not 0.0 < rho < 1.0:
        raise ParameterError(f"rho must lie in (0, 1), got {rho}")
    d = np.asarray(d, dtype=np.float64)
    mu = (1.0 - rho) * model.mu + rho * d
    var = (1.0 - rho) * model.var + rho * (d - mu) ** 2
    var = np.maximum(var, variance_floor)
    return BlockModel(mu=mu, var=var, log_threshold=log_threshold(mu, var),
                      prev_descriptor=model.prev_descriptor.copy(),
                      prev_label=model.prev_label)


class BackgroundModel:
    """Gaussians for every anchor of ``grid`` plus per-anchor stage-3 memory."""

    def __init__(self, grid, config, mu, var, prev_descriptor=None, prev_label=None):
        a = grid.n_anchors
        self.grid = grid
        self.config = config
        self.mu = np.ascontiguousarray(mu, dtype=np.float64).reshape(a, DESCRIPTOR_DIM)
        self.var = np.maximum(
            np.ascontiguousarray(var, dtype=np.float64).reshape(a, DESCRIPTOR_DIM),
            config.variance_floor)
        self.log_threshold = np.ascontiguousarray(
            kernels.log_threshold_np(self.mu, self.var))
        if prev_descriptor is None:
            prev_descriptor = np.zeros((a, DESCRIPTOR_DIM))
        self.prev_descriptor = np.ascontiguousarray(prev_descriptor, dtype=np.float64)
        if prev_label is None:
            prev_label = np.full(a, kernels.UNSET, dtype=np.int8)
        self.prev_label = np.ascontiguousarray(prev_label, dtype=np.int8)
        self.dominant = np.zeros(a, dtype=bool)

    def __len__(self):
        return self.grid.n_anchors

    def block(self, k):
        """Detached :class:`BlockModel` copy of anchor ``k``."""
        return BlockModel(
            mu=self.mu[k].copy(), var=self.var[k].copy(),
            log_threshold=float(self.log_threshold[k]),
            prev_descriptor=self.prev_descriptor[k].copy(),
            prev_label=_CODE_LABEL[int(self.prev_label[k])])

    def set_block(self, k, bm):
        self.mu[k] = bm.mu
        self.var[k] = bm.var
        self.log_threshold[k] = bm.log_threshold
        self.prev_descriptor[k] = bm.prev_descriptor
        self.prev_label[k] = _LABEL_CODE[bm.prev_label]

    def reset_memory(self):
        self.prev_label[:] = kernels.UNSET
        self.prev_descriptor[:] = 0.0

    def copy(self):
        out = BackgroundModel(self.grid, self.config, self.mu.copy(), self.var.copy(),
                              self.prev_descriptor.copy(), self.prev_label.copy())
        out.log_threshold = self.log_threshold.copy()
        out.dominant = self.dominant.copy()
        return out

    def branch_counts(self):
        """(dominant-component anchors, single-Gaussian anchors) from training."""
        n = int(self.dominant.sum())
        return n, len(self) - n


def fit_robust(samples, variance_floor=1e-4, max_iter=50, tol=1e-6):
    """Robust Gaussian estimate for each anchor of ``samples`` ``(A, T, 12)``.

    A two-component diagonal mixture is fitted by EM. When the weights differ
    by more than 0.5 the heavier component is kept; otherwise mean and
    variance come from all samples.
    """
    x = np.ascontiguousarray(samples, dtype=np.float64)
    if x.ndim == 2:
        x = x[None]
    return kernels.em_fit(x, float(variance_floor), int(max_iter), float(tol))


def _banded_samples(frames, grid):
    """Yield ``(row_slice, samples)`` with samples shaped ``(A_band, T, 12)``."""
    nrows = len(grid.rows)
    for start in range(0, nrows, _BAND_ROWS):
        rows = grid.rows[start:start + _BAND_ROWS]
        stack = np.stack([describe_frame(f, grid, rows=rows) for f in frames], axis=1)
        k0 = start * len(grid.cols)
        yield slice(k0, k0 + stack.shape[0]), stack


def _robust_means(frames, grid, config):
    a = grid.n_anchors
    mu = np.empty((a, DESCRIPTOR_DIM))
    var = np.empty((a, DESCRIPTOR_DIM))
    dominant = np.empty(a, dtype=bool)
    for sl, x in _banded_samples(frames, grid):
        m, v, dom = fit_robust(x, config.variance_floor, config.em_max_iter, config.em_tol)
        mu[sl], var[sl], dominant[sl] = m, v, dom
    return mu, var, dominant


def train(frames, grid=None, config=None):
    """Bootstrap a :class:`BackgroundModel` from training frames."""
    config = config or Config()
    frames = list(frames)
    if len(frames) < 2:
        raise TrainingError(f"need at least 2 training frames, got {len(frames)}")
    if grid is None:
        h, w = frames[0].shape[:2]
        grid = make_grid(w, h, config.block_size, config.advance)
    for f in frames:
        if f.shape[:2] != (grid.height, grid.width):
            raise TrainingError(
                f"training frame is {f.shape[1]}x{f.shape[0]}, grid expects "
                f"{grid.width}x{grid.height}")
    mu, var, dominant = _robust_means(frames, grid, config)
    model = BackgroundModel(grid, config, mu, var)
    model.dominant = dominant
    return model


# ------------------------------------------------------------ persistence

def save_model(model, path):
    """Write a lossless ``.npz`` snapshot with a versioned JSON header."""
    g = model.grid
    header = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "grid": {"width": g.width, "height": g.height,
                 "block_size": g.block_size, "advance": g.advance},
        "config": {k: getattr(model.config, k)
                   for k in model.config.__dataclass_fields__},
    }
    with open(path, "wb") as fh:
        np.savez(fh, header=np.frombuffer(json.dumps(header).encode(), dtype=np.uint8),
                 mu=model.mu, var=model.var, log_threshold=model.log_threshold,
                 prev_descriptor=model.prev_descriptor, prev_label=model.prev_label,
                 dominant=model.dominant)


def load_model(path):
    try:
        with np.load(path, allow_pickle=False) as z:
            header = json.loads(z["header"].tobytes().decode())
            arrays = {k: z[k] for k in z.files if k != "header"}
    except (OSError, ValueError, KeyError) as exc:
        raise ModelFormatError(f"{path}: not a model snapshot ({exc})") from None
    if header.get("format") != MODEL_FORMAT:
        raise ModelFormatError(f"{path}: unknown format {header.get('format')!r}")
    if header.get("version") != MODEL_VERSION:
        raise ModelFormatError(f"{path}: unsupported version {header.get('version')!r}")
    g = header["grid"]
    grid = make_grid(g["width"], g["height"], g["block_size"], g["advance"])
    config = Config(**header["config"])
    model = BackgroundModel(grid, config, arrays["mu"], arrays["var"],
                            arrays["prev_descriptor"], arrays["prev_label"])
    # keep the stored values bit-for-bit rather than recomputing
    model.var = np.ascontiguousarray(arrays["var"])
    model.log_threshold = np.ascontiguousarray(arrays["log_threshold"])
    model.dominant = arrays["dominant"].astype(bool)
    return model
