"""Mask scoring (precision / recall / F-measure) and CLEAR-MOT tracking scores."""
from dataclasses import dataclass, field
import math

import numpy as np
from scipy import ndimage

__all__ = [
    "MaskScore",
    "MotScore",
    "TrackFormatError",
    "score_mask",
    "linear_assignment",
    "assign",
    "score_tracking",
    "blobs_from_mask",
    "track_blobs",
    "read_tracks",
    "write_tracks",
]


class TrackFormatError(ValueError):
    pass


@dataclass(frozen=True)
class MaskScore:
    tp: int
    fp: int
    fn: int

    @property
    def precision(self):
        d = self.tp + self.fp
        return self.tp / d if d else 0.0

    @property
    def recall(self):
        d = self.tp + self.fn
        return self.tp / d if d else 0.0

    @property
    def f_measure(self):
        p, r = self.precision, self.recall
        return 2.0 * p * r / (p + r) if p + r else 0.0

    def line(self):
        return f"F={self.f_measure:.6f} P={self.precision:.6f} R={self.recall:.6f}"


def score_mask(predicted, truth):
    predicted = np.asarray(predicted)
    truth = np.asarray(truth)
    if predicted.shape != truth.shape:
        raise ValueError(f"mask shapes differ: {predicted.shape} vs {truth.shape}")
    p = predicted == 255
    t = truth == 255
    return MaskScore(tp=int(np.count_nonzero(p & t)),
                     fp=int(np.count_nonzero(p & ~t)),
                     fn=int(np.count_nonzero(~p & t)))


# --------------------------------------------------------------- munkres

def linear_assignment(cost):
    """Minimum-cost one-to-one assignment for a rectangular cost matrix.

    Shortest augmenting path form of the Hungarian method with row and
    column potentials, O(n^2 m). Returns ``(rows, cols)`` index arrays of
    length ``min(n, m)``.
    """
    cost = np.asarray(cost, dtype=np.float64)
    if cost.ndim != 2:
        raise ValueError("cost must be a 2-D array")
    if cost.size == 0:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64)
    transposed = cost.shape[0] > cost.shape[1]
    if transposed:
        cost = cost.T
    n, m = cost.shape
    if not np.all(np.isfinite(cost)):
        raise ValueError("cost matrix must be finite")

    u = np.zeros(n + 1)
    v = np.zeros(m + 1)
    owner = np.zeros(m + 1, dtype=np.int64)   # owner[j]: 1-based row on column j
    way = np.zeros(m + 1, dtype=np.int64)
    for i in range(1, n + 1):
        owner[0] = i
        j0 = 0
        minv = np.full(m + 1, np.inf)
        used = np.zeros(m + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = owner[j0]
            free = ~used[1:]
            cur = cost[i0 - 1] - u[i0] - v[1:]
            better = free & (cur < minv[1:])
            minv[1:][better] = cur[better]
            way[1:][better] = j0
            cand = np.where(free, minv[1:], np.inf)
            j1 = int(np.argmin(cand)) + 1
            delta = cand[j1 - 1]
            u[owner[used]] += delta
            v[used] -= delta
            minv[1:][free] -= delta
            j0 = j1
            if owner[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            owner[j0] = owner[j1]
            j0 = j1

    cols = np.flatnonzero(owner[1:])
    rows = owner[1:][cols] - 1
    order = np.argsort(rows)
    rows, cols = rows[order], cols[order]
    if transposed:
        rows, cols = cols, rows
        order = np.argsort(rows)
        rows, cols = rows[order], cols[order]
    return rows.astype(np.int64), cols.astype(np.int64)


def _distances(a, b):
    a = np.asarray(a, dtype=np.float64).reshape(-1, 2)
    b = np.asarray(b, dtype=np.float64).reshape(-1, 2)
    return np.sqrt(((a[:, None, :] - b[None, :, :]) ** 2).sum(axis=2))


def assign(truth_points, hyp_points, gate=30.0):
    """Optimal truth-to-hypothesis pairing; pairs farther than ``gate`` are dropped.

    Returns a list of ``(truth_index, hyp_index, distance)``.
    """
    if not gate > 0:
        raise ValueError(f"gate must be positive, got {gate}")
    if len(truth_points) == 0 or len(hyp_points) == 0:
        return []
    dist = _distances(truth_points, hyp_points)
    rows, cols = linear_assignment(dist)
    return [(int(r), int(c), float(dist[r, c]))
            for r, c in zip(rows, cols) if dist[r, c] <= gate]


# -------------------------------------------------------------- clear-mot

@dataclass
class MotScore:
    matches: list = field(default_factory=list)
    misses: list = field(default_factory=list)
    false_positives: list = field(default_factory=list)
    mismatches: list = field(default_factory=list)
    ground_truth: list = field(default_factory=list)
    distance_sum: float = 0.0

    @property
    def mota_defined(self):
        return sum(self.ground_truth) > 0

    @property
    def motp_defined(self):
        return sum(self.matches) > 0

    @property
    def mota(self):
        g = sum(self.ground_truth)
        if not g:
            return math.nan
        errors = sum(self.misses) + sum(self.false_positives) + sum(self.mismatches)
        return 1.0 - errors / g

    @property
    def motp(self):
        c = sum(self.matches)
        return self.distance_sum / c if c else 0.0

    def line(self):
        mota = f"{self.mota:.6f}" if self.mota_defined else "undefined"
        motp = f"{self.motp:.6f}" if self.motp_defined else "undefined"
        return f"MOTA={mota} MOTP={motp}"


def score_tracking(truth, hyps, gate=30.0):
    """CLEAR-MOT scores of ``hyps`` against ``truth``.

    Both are mappings ``frame -> [(object_id, (x, y)), ...]``. Matches from
    the previous frame are kept while they stay within ``gate``; the rest
    are paired by :func:`assign`. A mismatch is counted when a truth object
    is matched to a different hypothesis id than at its previous match.
    """
    score = MotScore()
    current = {}
    last = {}
    for t in sorted(set(truth) | set(hyps)):
        gts = dict(truth.get(t, ()))
        hs = dict(hyps.get(t, ()))
        matched = {}
        dsum = 0.0
        for gid, hid in current.items():
            if gid in gts and hid in hs:
                d = math.dist(gts[gid], hs[hid])
                if d <= gate:
                    matched[gid] = hid
                    dsum += d
        free_g = [g for g in gts if g not in matched]
        taken = set(matched.values())
        free_h = [h for h in hs if h not in taken]
        pairs = assign([gts[g] for g in free_g], [hs[h] for h in free_h], gate)
        for gi, hi, d in pairs:
            matched[free_g[gi]] = free_h[hi]
            dsum += d
        mme = 0
        for gid, hid in matched.items():
            if gid in last and last[gid] != hid:
                mme += 1
            last[gid] = hid
        current = matched
        c = len(matched)
        score.matches.append(c)
        score.misses.append(len(gts) - c)
        score.false_positives.append(len(hs) - c)
        score.mismatches.append(mme)
        score.ground_truth.append(len(gts))
        score.distance_sum += dsum
    return score


# ------------------------------------------------------------- hypotheses

_EIGHT = np.ones((3, 3), dtype=bool)


def blobs_from_mask(mask, min_area=15):
    """Centroids ``(x, y)`` of 8-connected foreground components.

    Components are ordered by the scanline position of their topmost,
    leftmost pixel; those smaller than ``min_area`` pixels are dropped.
    """
    fg = np.asarray(mask) > 0
    labels, n = ndimage.label(fg, structure=_EIGHT)
    if n == 0:
        return []
    idx = np.arange(1, n + 1)
    area = ndimage.sum_labels(fg, labels, idx)
    ys, xs = np.indices(fg.shape)
    cy = ndimage.sum_labels(ys, labels, idx) / area
    cx = ndimage.sum_labels(xs, labels, idx) / area
    return [(float(x), float(y)) for x, y, a in zip(cx, cy, area) if a >= min_area]


def track_blobs(masks, gate=30.0, min_area=15, frame_indices=None):
    """Turn a mask sequence into hypothesis tracks.

    Blob centroids inherit the id of the nearest previous-frame track within
    ``gate`` (optimal pairing); unmatched blobs start new ids.
    """
    if frame_indices is None:
        frame_indices = range(len(masks))
    tracks = {}
    prev = []
    next_id = 0
    for t, mask in zip(frame_indices, masks):
        pts = blobs_from_mask(mask, min_area)
        ids = [None] * len(pts)
        for pi, ci, _ in assign([p for _, p in prev], pts, gate):
            ids[ci] = prev[pi][0]
        for k in range(len(ids)):
            if ids[k] is None:
                ids[k] = str(next_id)
                next_id += 1
        cur = list(zip(ids, pts))
        tracks[t] = cur
        prev = cur
    return tracks


# ------------------------------------------------------------ track files

def read_tracks(path):
    """Parse ``frame_index,object_id,x,y`` lines; ``#`` lines are comments."""
    tracks = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = [p.strip() for p in line.split(",")]
            if len(parts) != 4:
                raise TrackFormatError(f"{path}:{lineno}: expected 4 fields, got {len(parts)}")
            try:
                t = int(parts[0])
                x, y = float(parts[2]), float(parts[3])
            except ValueError:
                raise TrackFormatError(f"{path}:{lineno}: bad number in {line!r}") from None
            frame = tracks.setdefault(t, [])
            if any(oid == parts[1] for oid, _ in frame):
                raise TrackFormatError(f"{path}:{lineno}: duplicate id {parts[1]!r} in frame {t}")
            frame.append((parts[1], (x, y)))
    return tracks


def write_tracks(tracks, path):
    with open(path, "w") as fh:
        fh.write("# frame_index,object_id,x,y\n")
        for t in sorted(tracks):
            for oid, (x, y) in tracks[t]:
                fh.write(f"{t},{oid},{x!r},{y!r}\n")
