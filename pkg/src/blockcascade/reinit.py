"""Scene-change detection and rebuilding of model means."""
from dataclasses import dataclass, field

from . import kernels
from .model import _robust_means

__all__ = ["ReinitState", "ReinitError", "observe", "rebuild", "NONE", "TRIGGERED"]

NONE = "none"
TRIGGERED = "triggered"


class ReinitError(RuntimeError):
    pass


@dataclass
class ReinitState:
    area_threshold: float = 0.70
    window: int = 15
    consecutive_heavy_frames: int = 0
    frame_buffer: list = field(default_factory=list)

    def __post_init__(self):
        if not 0.0 < self.area_threshold < 1.0:
            raise ValueError(f"area_threshold must lie in (0, 1), got {self.area_threshold}")
        if self.window < 1:
            raise ValueError(f"window must be >= 1, got {self.window}")

    def clear(self):
        self.consecutive_heavy_frames = 0
        self.frame_buffer = []


def observe(state, frame, fg_block_fraction):
    """Track consecutive frames whose foreground block share is heavy.

    Returns ``TRIGGERED`` on the frame that completes the window.
    """
    if fg_block_fraction >= state.area_threshold:
        state.consecutive_heavy_frames += 1
        state.frame_buffer.append(frame)
        if len(state.frame_buffer) > state.window:
            state.frame_buffer.pop(0)
        if state.consecutive_heavy_frames >= state.window:
            return TRIGGERED
    else:
        state.clear()
    return NONE


def rebuild(model, buffered, state=None):
    """Re-estimate every anchor mean from ``buffered``; variances are untouched.

    Thresholds are recomputed from the new means and the old variances and
    stage-3 memory is reset. ``model`` is modified in place and returned.
    """
    buffered = list(buffered)
    if not buffered:
        raise ReinitError("cannot rebuild from an empty frame buffer")
    mu, _, _ = _robust_means(buffered, model.grid, model.config)
    model.mu[:] = mu
    model.log_threshold[:] = kernels.log_threshold_np(model.mu, model.var)
    model.reset_memory()
    if state is not None:
        state.clear()
    return model
