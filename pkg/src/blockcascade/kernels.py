"""Hot loops, each in a numba flavour and a numpy flavour.

The public names at the bottom dispatch on ``_accel.USE_NUMBA``. Both
flavours are importable directly (``*_nb`` / ``*_np``) so tests can check
them against each other.

Label codes used throughout: ``BG = 0``, ``FG = 1``, ``UNSET = -1``.
Stage codes: ``EXHAUSTED = 0``, then 1, 2, 3 for the deciding stage.
"""
import math

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from . import _accel
from ._accel import njit

BG = 0
FG = 1
UNSET = -1

EXHAUSTED = 0

# counter slots filled by the cascade kernels
CNT_STAGE1 = 0
CNT_STAGE2 = 1
CNT_STAGE3 = 2
CNT_ADAPT = 3

D = 12
LOG_2PI = math.log(2.0 * math.pi)


# ---------------------------------------------------------------- descriptors

def block_descriptors_np(img, rows, cols, basis):
    n = basis.shape[1]
    win = sliding_window_view(img, n, axis=0)[rows]            # (R, W, 3, n)
    vert = np.einsum("rwcn,un->urwc", win, basis)                # (3, R, W, 3)
    hwin = sliding_window_view(vert, n, axis=2)[:, :, cols]      # (3, R, C, 3, n)
    c00 = hwin[0] @ basis[0]
    c01 = hwin[0] @ basis[1]
    c10 = hwin[1] @ basis[0]
    c20 = hwin[2] @ basis[0]
    out = np.stack([c00, c01, c10, c20], axis=-1)                # (R, C, 3, 4)
    return out.reshape(len(rows) * len(cols), D)


@njit(cache=True)
def block_descriptors_nb(img, rows, cols, basis):
    n = basis.shape[1]
    width = img.shape[1]
    nr = rows.shape[0]
    nc = cols.shape[0]
    out = np.empty((nr * nc, D))
    vert = np.empty((3, width, 3))
    for ri in range(nr):
        i = rows[ri]
        for x in range(width):
            for ch in range(3):
                s0 = 0.0
                s1 = 0.0
                s2 = 0.0
                for a in range(n):
                    p = img[i + a, x, ch]
                    s0 += basis[0, a] * p
                    s1 += basis[1, a] * p
                    s2 += basis[2, a] * p
                vert[0, x, ch] = s0
                vert[1, x, ch] = s1
                vert[2, x, ch] = s2
        for ci in range(nc):
            j = cols[ci]
            k = ri * nc + ci
            for ch in range(3):
                c00 = 0.0
                c01 = 0.0
                c10 = 0.0
                c20 = 0.0
                for b in range(n):
                    b0 = basis[0, b]
                    c00 += b0 * vert[0, j + b, ch]
                    c01 += basis[1, b] * vert[0, j + b, ch]
                    c10 += b0 * vert[1, j + b, ch]
                    c20 += b0 * vert[2, j + b, ch]
                out[k, 4 * ch] = c00
                out[k, 4 * ch + 1] = c01
                out[k, 4 * ch + 2] = c10
                out[k, 4 * ch + 3] = c20
    return out


# ------------------------------------------------------------ gaussian model

def log_norm_const_np(var):
    return -0.5 * D * LOG_2PI - 0.5 * np.log(var).sum(axis=-1)


def log_threshold_np(mu, var):
    t = mu + 2.0 * np.sqrt(var)
    return -0.5 * (((t - mu) ** 2) / var).sum(axis=-1) + log_norm_const_np(var)


@njit(cache=True)
def _log_norm_const(var, k):
    s = 0.0
    for q in range(D):
        s += math.log(var[k, q])
    return -0.5 * D * LOG_2PI - 0.5 * s


@njit(cache=True)
def _log_threshold(mu, var, k):
    m = 0.0
    for q in range(D):
        sd = math.sqrt(var[k, q])
        t = mu[k, q] + 2.0 * sd
        diff = t - mu[k, q]
        m += diff * diff / var[k, q]
    return -0.5 * m + _log_norm_const(var, k)


@njit(cache=True)
def log_threshold_nb(mu, var):
    out = np.empty(mu.shape[0])
    for k in range(mu.shape[0]):
        out[k] = _log_threshold(mu, var, k)
    return out


# ----------------------------------------------------------------- cascade

def _cosdist_rows_np(a, b):
    na = np.sqrt((a * a).sum(axis=1))
    nb = np.sqrt((b * b).sum(axis=1))
    dot = (a * b).sum(axis=1)
    ok = (na >= 1e-12) & (nb >= 1e-12)
    out = np.ones(a.shape[0])
    out[ok] = 1.0 - dot[ok] / (na[ok] * nb[ok])
    return out


def cascade_step_np(desc, mu, var, log_thr, prev_desc, prev_label,
                    c1, c2, rho, var_floor, counters):
    """Classify every block of one frame and update the model in place.

    Returns ``(labels, decided_by)`` as int8 arrays. Each stage is evaluated
    only on the blocks still undecided when it is reached.
    """
    a = desc.shape[0]
    labels = np.full(a, FG, dtype=np.int8)
    decided = np.full(a, EXHAUSTED, dtype=np.int8)

    diff = desc - mu
    ll = -0.5 * (diff * diff / var).sum(axis=1) + log_norm_const_np(var)
    s1 = ll >= log_thr
    counters[CNT_STAGE1] += a
    decided[s1] = 1

    rest = np.flatnonzero(~s1)
    counters[CNT_STAGE2] += rest.size
    s2 = _cosdist_rows_np(desc[rest], mu[rest]) <= c1
    decided[rest[s2]] = 2

    rest = rest[~s2]
    counters[CNT_STAGE3] += rest.size
    was_bg = prev_label[rest] == BG
    cand = rest[was_bg]
    s3 = _cosdist_rows_np(prev_desc[cand], desc[cand]) <= c2
    decided[cand[s3]] = 3

    bg = decided != EXHAUSTED
    labels[bg] = BG
    idx = np.flatnonzero(bg)
    counters[CNT_ADAPT] += idx.size
    if idx.size:
        d = desc[idx]
        m = (1.0 - rho) * mu[idx] + rho * d
        v = (1.0 - rho) * var[idx] + rho * (d - m) ** 2
        v = np.maximum(v, var_floor)
        mu[idx] = m
        var[idx] = v
        log_thr[idx] = log_threshold_np(m, v)
    prev_desc[:] = desc
    prev_label[:] = labels
    return labels, decided


@njit(cache=True)
def _cosdist_row(a, ka, b, kb):
    dot = 0.0
    na = 0.0
    nb = 0.0
    for q in range(D):
        x = a[ka, q]
        y = b[kb, q]
        dot += x * y
        na += x * x
        nb += y * y
    na = math.sqrt(na)
    nb = math.sqrt(nb)
    if na < 1e-12 or nb < 1e-12:
        return 1.0
    return 1.0 - dot / (na * nb)


@njit(cache=True)
def cascade_step_nb(desc, mu, var, log_thr, prev_desc, prev_label,
                    c1, c2, rho, var_floor, counters):
    a = desc.shape[0]
    labels = np.empty(a, dtype=np.int8)
    decided = np.empty(a, dtype=np.int8)
    for k in range(a):
        stage = EXHAUSTED
        counters[CNT_STAGE1] += 1
        maha = 0.0
        for q in range(D):
            diff = desc[k, q] - mu[k, q]
            maha += diff * diff / var[k, q]
        ll = -0.5 * maha + _log_norm_const(var, k)
        if ll >= log_thr[k]:
            stage = 1
        else:
            counters[CNT_STAGE2] += 1
            if _cosdist_row(desc, k, mu, k) <= c1:
                stage = 2
            else:
                counters[CNT_STAGE3] += 1
                if prev_label[k] == BG and _cosdist_row(prev_desc, k, desc, k) <= c2:
                    stage = 3
        decided[k] = stage
        if stage != EXHAUSTED:
            labels[k] = BG
            counters[CNT_ADAPT] += 1
            for q in range(D):
                m = (1.0 - rho) * mu[k, q] + rho * desc[k, q]
                r = desc[k, q] - m
                v = (1.0 - rho) * var[k, q] + rho * r * r
                mu[k, q] = m
                var[k, q] = v if v > var_floor else var_floor
            log_thr[k] = _log_threshold(mu, var, k)
        else:
            labels[k] = FG
        for q in range(D):
            prev_desc[k, q] = desc[k, q]
        prev_label[k] = labels[k]
    return labels, decided


# ---------------------------------------------------------------------- EM

def em_fit_np(x, var_floor, max_iter, tol):
    """Robust per-anchor fit over ``x`` of shape ``(A, T, D)``.

    Returns ``(mu, var, dominant)``; ``dominant[k]`` is True when the
    heavier mixture component was adopted.
    """
    a, t, _ = x.shape
    mean = x.mean(axis=1)
    xc = x - mean[:, None]                      # centred copy keeps x**2 small
    pooled = (xc * xc).mean(axis=1)
    sd = np.sqrt(pooled)
    pooled = np.maximum(pooled, var_floor)
    xc2 = xc * xc

    mus = np.stack([-0.1 * sd, 0.1 * sd], axis=1)                # (A, 2, D)
    vs = np.stack([pooled, pooled], axis=1)
    ws = np.full((a, 2), 0.5)
    prev_ll = np.full(a, -np.inf)
    active = np.ones(a, dtype=bool)

    for it in range(max_iter):
        # squared Mahalanobis term expanded so no (A, T, 2, D) temporary is built
        inv = 1.0 / vs
        maha = (np.einsum("atd,akd->atk", xc2, inv)
                - 2.0 * np.einsum("atd,akd->atk", xc, mus * inv)
                + (mus * mus * inv).sum(axis=2)[:, None])
        logp = (-0.5 * maha
                - 0.5 * np.log(vs).sum(axis=2)[:, None]
                - 0.5 * D * LOG_2PI
                + np.log(np.maximum(ws, 1e-300))[:, None])       # (A, T, 2)
        top = logp.max(axis=2, keepdims=True)
        lse = top + np.log(np.exp(logp - top).sum(axis=2, keepdims=True))
        ll = lse.sum(axis=(1, 2))
        if it > 0:
            active &= ~(np.abs(ll - prev_ll) <= tol * np.abs(ll))
        if not active.any():
            break
        prev_ll = np.where(active, ll, prev_ll)
        resp = np.exp(logp - lse)                                # (A, T, 2)
        nk = resp.sum(axis=1)                                    # (A, 2)
        safe = np.maximum(nk, 1e-300)[:, :, None]
        new_mu = np.einsum("atk,atd->akd", resp, xc) / safe
        new_v = np.einsum("atk,atd->akd", resp, xc2) / safe - new_mu * new_mu
        new_v = np.maximum(new_v, var_floor)
        keep = (nk > 1e-10)[:, :, None] & active[:, None, None]
        mus = np.where(keep, new_mu, mus)
        vs = np.where(keep, new_v, vs)
        ws = np.where(active[:, None], nk / t, ws)

    dominant = np.abs(ws[:, 0] - ws[:, 1]) > 0.5
    pick = np.argmax(ws, axis=1)
    rows = np.arange(a)
    mu = mean + np.where(dominant[:, None], mus[rows, pick], 0.0)
    var = np.where(dominant[:, None], vs[rows, pick], pooled)
    return mu, var, dominant


@njit(cache=True)
def _em_one(x, var_floor, max_iter, tol, mu_out, var_out):
    t = x.shape[0]
    mean = np.zeros(D)
    for s in range(t):
        for q in range(D):
            mean[q] += x[s, q]
    for q in range(D):
        mean[q] /= t
    xc = np.empty((t, D))
    pooled = np.zeros(D)
    for s in range(t):
        for q in range(D):
            r = x[s, q] - mean[q]
            xc[s, q] = r
            pooled[q] += r * r
    sd = np.empty(D)
    for q in range(D):
        pooled[q] /= t
        sd[q] = math.sqrt(pooled[q])
        if pooled[q] < var_floor:
            pooled[q] = var_floor

    mus = np.empty((2, D))
    vs = np.empty((2, D))
    inv = np.empty((2, D))
    for q in range(D):
        mus[0, q] = -0.1 * sd[q]
        mus[1, q] = 0.1 * sd[q]
        vs[0, q] = pooled[q]
        vs[1, q] = pooled[q]
    w = np.array([0.5, 0.5])
    nk = np.empty(2)
    s1 = np.empty((2, D))
    s2 = np.empty((2, D))
    prev_ll = -np.inf
    for it in range(max_iter):
        c0 = -0.5 * D * LOG_2PI + math.log(max(w[0], 1e-300))
        c1 = -0.5 * D * LOG_2PI + math.log(max(w[1], 1e-300))
        for q in range(D):
            c0 -= 0.5 * math.log(vs[0, q])
            c1 -= 0.5 * math.log(vs[1, q])
            inv[0, q] = 1.0 / vs[0, q]
            inv[1, q] = 1.0 / vs[1, q]
        nk[:] = 0.0
        s1[:] = 0.0
        s2[:] = 0.0
        ll = 0.0
        # one pass: E-step plus the sufficient statistics for the M-step
        for s in range(t):
            m0 = 0.0
            m1 = 0.0
            for q in range(D):
                r0 = xc[s, q] - mus[0, q]
                r1 = xc[s, q] - mus[1, q]
                m0 += r0 * r0 * inv[0, q]
                m1 += r1 * r1 * inv[1, q]
            l0 = c0 - 0.5 * m0
            l1 = c1 - 0.5 * m1
            e = math.exp(-abs(l0 - l1))
            lse = (l0 if l0 > l1 else l1) + math.log1p(e)
            ll += lse
            if l0 >= l1:
                g0 = 1.0 / (1.0 + e)
                g1 = e * g0
            else:
                g1 = 1.0 / (1.0 + e)
                g0 = e * g1
            nk[0] += g0
            nk[1] += g1
            for q in range(D):
                v = xc[s, q]
                s1[0, q] += g0 * v
                s1[1, q] += g1 * v
                s2[0, q] += g0 * v * v
                s2[1, q] += g1 * v * v
        if it > 0 and abs(ll - prev_ll) <= tol * abs(ll):
            break
        prev_ll = ll
        for k in range(2):
            w[k] = nk[k] / t
            if nk[k] <= 1e-10:
                continue
            for q in range(D):
                m = s1[k, q] / nk[k]
                v = s2[k, q] / nk[k] - m * m
                mus[k, q] = m
                vs[k, q] = v if v > var_floor else var_floor

    dominant = abs(w[0] - w[1]) > 0.5
    pick = 0 if w[0] >= w[1] else 1
    for q in range(D):
        if dominant:
            mu_out[q] = mean[q] + mus[pick, q]
            var_out[q] = vs[pick, q]
        else:
            mu_out[q] = mean[q]
            var_out[q] = pooled[q]
    return dominant


@njit(cache=True)
def em_fit_nb(x, var_floor, max_iter, tol):
    a = x.shape[0]
    mu = np.empty((a, D))
    var = np.empty((a, D))
    dominant = np.empty(a, dtype=np.bool_)
    for k in range(a):
        dominant[k] = _em_one(x[k], var_floor, max_iter, tol, mu[k], var[k])
    return mu, var, dominant


# ------------------------------------------------------------------- votes

def accumulate_votes_np(flags, rows, cols, n, height, width):
    """Count, per pixel, the flagged blocks covering it.

    ``flags`` has shape ``(len(rows), len(cols))``.
    """
    acc = np.zeros((height + 1, width + 1), dtype=np.int64)
    ri, ci = np.nonzero(flags)
    i = rows[ri]
    j = cols[ci]
    np.add.at(acc, (i, j), 1)
    np.add.at(acc, (i, j + n), -1)
    np.add.at(acc, (i + n, j), -1)
    np.add.at(acc, (i + n, j + n), 1)
    return acc.cumsum(axis=0).cumsum(axis=1)[:height, :width]


@njit(cache=True)
def accumulate_votes_nb(flags, rows, cols, n, height, width):
    acc = np.zeros((height + 1, width + 1), dtype=np.int64)
    for ri in range(rows.shape[0]):
        i = rows[ri]
        for ci in range(cols.shape[0]):
            if flags[ri, ci]:
                j = cols[ci]
                acc[i, j] += 1
                acc[i, j + n] -= 1
                acc[i + n, j] -= 1
                acc[i + n, j + n] += 1
    for y in range(height + 1):
        for x in range(1, width + 1):
            acc[y, x] += acc[y, x - 1]
    for y in range(1, height + 1):
        for x in range(width + 1):
            acc[y, x] += acc[y - 1, x]
    return acc[:height, :width].copy()


# ---------------------------------------------------------------- dispatch

if _accel.USE_NUMBA:
    block_descriptors = block_descriptors_nb
    cascade_step = cascade_step_nb
    em_fit = em_fit_nb
    accumulate_votes = accumulate_votes_nb
    log_threshold = log_threshold_nb
else:
    block_descriptors = block_descriptors_np
    cascade_step = cascade_step_np
    em_fit = em_fit_np
    accumulate_votes = accumulate_votes_np
    log_threshold = log_threshold_np
