"""Frame-by-frame segmentation driver."""
from dataclasses import dataclass, field
import time

import numpy as np

from .cascade import CascadeStats, classify_frame
from .config import Config
from .descriptor import describe_frame
from .mask import integrate
from .model import train
from .reinit import ReinitState, TRIGGERED, observe, rebuild

__all__ = ["Segmenter", "RunReport", "segment_sequence"]


@dataclass
class RunReport:
    frames_processed: int = 0
    reinit_events: list = field(default_factory=list)
    fg_block_fractions: list = field(default_factory=list)
    fg_pixel_fractions: list = field(default_factory=list)
    seconds: float = 0.0
    train_seconds: float = 0.0
    stats: CascadeStats = field(default_factory=CascadeStats)

    @property
    def fps(self):
        return self.frames_processed / self.seconds if self.seconds > 0 else float("inf")

    @property
    def mean_fg_fraction(self):
        return float(np.mean(self.fg_pixel_fractions)) if self.fg_pixel_fractions else 0.0

    def summary(self):
        return (f"frames={self.frames_processed} "
                f"reinit={','.join(map(str, self.reinit_events)) or 'none'} "
                f"mean_fg={self.mean_fg_fraction:.4f} fps={self.fps:.2f}")


class Segmenter:
    """Owns a background model and turns frames into masks in sequence order."""

    def __init__(self, model, config=None, first_index=0):
        self.model = model
        self.config = config or model.config
        self.model.config = self.config
        self.reinit = ReinitState(self.config.reinit_area, self.config.reinit_window)
        self.report = RunReport()
        self.index = first_index

    def process(self, frame):
        grid = self.model.grid
        t0 = time.perf_counter()
        desc = describe_frame(frame, grid)
        fg, _ = classify_frame(self.model, desc, self.report.stats)
        frac = float(fg.mean())
        if observe(self.reinit, frame, frac) == TRIGGERED:
            rebuild(self.model, self.reinit.frame_buffer, self.reinit)
            self.report.reinit_events.append(self.index)
        mask = integrate(fg, grid, self.config.vote_threshold)
        self.report.seconds += time.perf_counter() - t0
        self.report.frames_processed += 1
        self.report.fg_block_fractions.append(frac)
        self.report.fg_pixel_fractions.append(float(np.count_nonzero(mask)) / mask.size)
        self.index += 1
        return mask


def segment_sequence(frames, config=None, model=None):
    """Train on the head of ``frames`` (unless ``model`` is given) and segment the rest.

    Returns ``(masks, report)``; ``masks[k]`` belongs to frame
    ``config.training_frames + k`` when training inline, else to frame ``k``.
    """
    config = config or Config()
    frames = list(frames)
    start = 0
    train_seconds = 0.0
    if model is None:
        if len(frames) <= config.training_frames:
            raise ValueError(
                f"sequence has {len(frames)} frames, training needs "
                f"{config.training_frames} plus at least one to segment")
        t0 = time.perf_counter()
        model = train(frames[:config.training_frames], config=config)
        train_seconds = time.perf_counter() - t0
        start = config.training_frames
    seg = Segmenter(model, config, first_index=start)
    seg.report.train_seconds = train_seconds
    masks = [seg.process(f) for f in frames[start:]]
    return masks, seg.report
