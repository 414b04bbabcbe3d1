"""Three-stage block classifier.

Stage 1 tests the Gaussian likelihood, stage 2 the cosine distance to the
model mean (illumination scaling), stage 3 the cosine distance to the
previous frame's descriptor when that block was background. The first
stage to call a block background ends the cascade for it.
"""
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import kernels
from .model import (BACKGROUND, FOREGROUND, adapt, log_likelihood)

__all__ = [
    "BlockLabel",
    "CascadeStats",
    "cosdist",
    "classify_block",
    "classify_frame",
    "STAGE1",
    "STAGE2",
    "STAGE3",
    "EXHAUSTED",
]

STAGE1 = "stage1"
STAGE2 = "stage2"
STAGE3 = "stage3"
EXHAUSTED = "exhausted"

STAGE_NAMES = {kernels.EXHAUSTED: EXHAUSTED, 1: STAGE1, 2: STAGE2, 3: STAGE3}

_NORM_GUARD = 1e-12


class BlockLabel(NamedTuple):
    value: str
    decided_by: str


@dataclass
class CascadeStats:
    """Running instrumentation counters."""
    stage1_evals: int = 0
    stage2_evals: int = 0
    stage3_evals: int = 0
    adapt_calls: int = 0
    decided: dict = field(default_factory=lambda: {
        STAGE1: 0, STAGE2: 0, STAGE3: 0, EXHAUSTED: 0})

    @property
    def background_blocks(self):
        return self.decided[STAGE1] + self.decided[STAGE2] + self.decided[STAGE3]

    def _absorb(self, counters, decided_by):
        self.stage1_evals += int(counters[kernels.CNT_STAGE1])
        self.stage2_evals += int(counters[kernels.CNT_STAGE2])
        self.stage3_evals += int(counters[kernels.CNT_STAGE3])
        self.adapt_calls += int(counters[kernels.CNT_ADAPT])
        counts = np.bincount(decided_by, minlength=4)
        for code, name in STAGE_NAMES.items():
            self.decided[name] += int(counts[code])


def cosdist(a, b):
    """One minus the cosine of the angle between ``a`` and ``b``.

    Returns 1 when either vector is (numerically) zero.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na < _NORM_GUARD or nb < _NORM_GUARD:
        return 1.0
    return float(1.0 - (a @ b) / (na * nb))


def classify_block(model, d, C1=0.001, C2=0.0005, rho=0.01,
                   variance_floor=1e-4, stats=None):
    """Label one block and return ``(label, updated_model)``.

    The returned model has been adapted when the label is background and
    always carries ``d`` and the label as its stage-3 memory.
    """
    d = np.asarray(d, dtype=np.float64)
    if stats is not None:
        stats.stage1_evals += 1
    if log_likelihood(model, d) >= model.log_threshold:
        decided = STAGE1
    else:
        if stats is not None:
            stats.stage2_evals += 1
        if cosdist(d, model.mu) <= C1:
            decided = STAGE2
        else:
            if stats is not None:
                stats.stage3_evals += 1
            if model.prev_label == BACKGROUND and cosdist(model.prev_descriptor, d) <= C2:
                decided = STAGE3
            else:
                decided = EXHAUSTED

    if decided == EXHAUSTED:
        label = BlockLabel(FOREGROUND, EXHAUSTED)
        new = type(model)(mu=model.mu.copy(), var=model.var.copy(),
                          log_threshold=model.log_threshold)
    else:
        label = BlockLabel(BACKGROUND, decided)
        new = adapt(model, d, rho, variance_floor)
        if stats is not None:
            stats.adapt_calls += 1
    if stats is not None:
        stats.decided[decided] += 1
    new.prev_descriptor = d.copy()
    new.prev_label = label.value
    return label, new


def classify_frame(model, descriptors, stats=None):
    """Run the cascade over all anchors of one frame, updating ``model``.

    Returns ``(fg, decided_by)``: a boolean foreground flag per anchor and
    the int8 stage code that decided it (0 = exhausted).
    """
    cfg = model.config
    desc = np.ascontiguousarray(descriptors, dtype=np.float64)
    counters = np.zeros(4, dtype=np.int64)
    labels, decided = kernels.cascade_step(
        desc, model.mu, model.var, model.log_threshold,
        model.prev_descriptor, model.prev_label,
        float(cfg.C1), float(cfg.C2), float(cfg.rho), float(cfg.variance_floor),
        counters)
    if stats is not None:
        stats._absorb(counters, decided)
    return labels == kernels.FG, decided
