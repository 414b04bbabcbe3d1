"""Pixel-level mask from overlapping block labels by vote ratio."""
from dataclasses import dataclass

import numpy as np

from . import kernels
from .model import FOREGROUND

__all__ = ["VoteGrid", "precompute_totals", "count_votes", "integrate"]


@dataclass
class VoteGrid:
    fg_votes: np.ndarray
    total_votes: np.ndarray

    @property
    def probability(self):
        return self.fg_votes / self.total_votes


_TOTALS_CACHE = {}


def precompute_totals(grid, width=None, height=None):
    """Number of blocks covering each pixel; cached per grid geometry."""
    width = grid.width if width is None else width
    height = grid.height if height is None else height
    key = (grid.width, grid.height, grid.block_size, grid.advance, width, height)
    totals = _TOTALS_CACHE.get(key)
    if totals is None:
        flags = np.ones(grid.shape, dtype=np.bool_)
        totals = kernels.accumulate_votes(flags, grid.rows, grid.cols,
                                          grid.block_size, height, width)
        totals.setflags(write=False)
        _TOTALS_CACHE[key] = totals
    return totals


def _as_flags(labels, grid):
    if isinstance(labels, np.ndarray):
        flags = labels.astype(np.bool_)
    else:
        flags = np.array([getattr(lab, "value", lab) == FOREGROUND for lab in labels],
                         dtype=np.bool_)
    if flags.size != grid.n_anchors:
        raise ValueError(f"got {flags.size} labels for {grid.n_anchors} anchors")
    return np.ascontiguousarray(flags.reshape(grid.shape))


def count_votes(labels, grid):
    flags = _as_flags(labels, grid)
    fg = kernels.accumulate_votes(flags, grid.rows, grid.cols, grid.block_size,
                                  grid.height, grid.width)
    return VoteGrid(fg_votes=fg, total_votes=precompute_totals(grid))


def integrate(labels, grid, vote_threshold=0.90):
    """Binary mask: 255 where the foreground vote ratio reaches the threshold.

    ``labels`` is either a boolean foreground flag per anchor or a sequence
    of :class:`~blockcascade.cascade.BlockLabel`.
    """
    votes = count_votes(labels, grid)
    on = votes.probability >= vote_threshold
    return np.where(on, 255, 0).astype(np.uint8)
