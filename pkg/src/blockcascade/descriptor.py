"""Overlapping block grid and the 12-value low-order DCT block descriptor."""
from dataclasses import dataclass
from functools import lru_cache
import math

import numpy as np

from . import kernels

__all__ = [
    "BlockGrid",
    "GridError",
    "make_grid",
    "dct_basis",
    "dct_block",
    "describe_frame",
    "ZIGZAG4",
    "DESCRIPTOR_DIM",
]

DESCRIPTOR_DIM = 12
# (row frequency, column frequency) of the retained coefficients
ZIGZAG4 = ((0, 0), (0, 1), (1, 0), (2, 0))


class GridError(ValueError):
    pass


def _axis_anchors(length, block_size, advance):
    last = length - block_size
    pos = list(range(0, last + 1, advance))
    if pos[-1] != last:
        pos.append(last)
    return np.asarray(pos, dtype=np.int64)


@dataclass(frozen=True)
class BlockGrid:
    """Anchor layout of square blocks over a ``height x width`` frame.

    Anchors are the Cartesian product ``rows x cols`` enumerated row-major;
    anchor ``k`` sits at ``(rows[k // len(cols)], cols[k % len(cols)])``.
    """
    width: int
    height: int
    block_size: int
    advance: int
    rows: np.ndarray
    cols: np.ndarray

    @property
    def shape(self):
        return (len(self.rows), len(self.cols))

    @property
    def n_anchors(self):
        return len(self.rows) * len(self.cols)

    @property
    def anchors(self):
        ii, jj = np.meshgrid(self.rows, self.cols, indexing="ij")
        return np.stack([ii.ravel(), jj.ravel()], axis=1)

    def __eq__(self, other):
        if not isinstance(other, BlockGrid):
            return NotImplemented
        return (self.width, self.height, self.block_size, self.advance) == (
            other.width, other.height, other.block_size, other.advance)

    def __hash__(self):
        return hash((self.width, self.height, self.block_size, self.advance))


def make_grid(width, height, block_size=8, advance=1):
    if block_size < 1:
        raise GridError(f"block_size must be positive, got {block_size}")
    if not 1 <= advance <= block_size:
        raise GridError(f"advance must lie in [1, {block_size}], got {advance}")
    if block_size > min(width, height):
        raise GridError(
            f"block {block_size}x{block_size} does not fit a {width}x{height} frame")
    return BlockGrid(
        width=int(width), height=int(height),
        block_size=int(block_size), advance=int(advance),
        rows=_axis_anchors(height, block_size, advance),
        cols=_axis_anchors(width, block_size, advance),
    )


@lru_cache(maxsize=None)
def _basis(n):
    x = np.arange(n)
    u = np.arange(n)[:, None]
    b = np.cos(math.pi * (2 * x + 1) * u / (2 * n))
    b[0] *= math.sqrt(1.0 / n)
    b[1:] *= math.sqrt(2.0 / n)
    b.setflags(write=False)
    return b


def dct_basis(n):
    """Orthonormal DCT-II matrix; row ``u`` holds the frequency-``u`` basis."""
    return _basis(int(n))


def _low_basis(n):
    b = _basis(n)
    if n >= 3:
        return np.ascontiguousarray(b[:3])
    # blocks narrower than 3 have no (2, 0) coefficient; pad with zeros
    out = np.zeros((3, n))
    out[:n] = b
    return out


def dct_block(frame, anchor, block_size):
    """Descriptor of the block whose top-left pixel is ``anchor = (i, j)``.

    Per channel the orthonormal 2-D DCT-II is taken with separable row and
    column passes and the first four zig-zag coefficients are kept.
    """
    i, j = anchor
    n = block_size
    frame = np.asarray(frame)
    if i < 0 or j < 0 or i + n > frame.shape[0] or j + n > frame.shape[1]:
        raise GridError(f"block at {anchor} of size {n} leaves the frame")
    b = _basis(n)
    out = np.empty(DESCRIPTOR_DIM)
    for ch in range(3):
        block = frame[i:i + n, j:j + n, ch].astype(np.float64)
        coef = b @ block @ b.T
        for q, (u, v) in enumerate(ZIGZAG4):
            out[4 * ch + q] = coef[u, v] if u < n and v < n else 0.0
    return out


def describe_frame(frame, grid, rows=None):
    """Descriptors for every anchor of ``grid`` as an ``(A, 12)`` array.

    ``rows`` restricts the computation to a subset of anchor rows; the
    result is then ordered row-major over that subset.
    """
    frame = np.asarray(frame)
    if frame.shape[:2] != (grid.height, grid.width):
        raise GridError(
            f"frame is {frame.shape[1]}x{frame.shape[0]}, grid expects "
            f"{grid.width}x{grid.height}")
    img = np.ascontiguousarray(frame, dtype=np.float64)
    rows = grid.rows if rows is None else np.asarray(rows, dtype=np.int64)
    return kernels.block_descriptors(img, rows, grid.cols, _low_basis(grid.block_size))
