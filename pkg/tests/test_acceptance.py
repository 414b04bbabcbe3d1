"""End-to-end acceptance checks.

Each test records one PASS / FAIL / SKIP line, printed in the "acceptance
criteria" section of the pytest summary. Set BLOCKCASCADE_I2R to a directory
of converted I2R sequences to enable the dataset check (see README).
"""
import os
from pathlib import Path
import time

import numpy as np
import pytest

import conftest
from blockcascade import imaging, scenarios, synth
from blockcascade.cascade import STAGE1, STAGE2
from blockcascade.cli import bench_advances
from blockcascade.config import Config
from blockcascade.descriptor import dct_basis, dct_block, make_grid
from blockcascade.mask import integrate
from blockcascade.metrics import assign, score_mask, score_tracking, track_blobs
from blockcascade.model import train
from blockcascade.segment import Segmenter, segment_sequence

from test_descriptor import dct_direct, descriptor_direct
from test_mask import brute_force_mask
from test_metrics import brute_min_cost

_recorded = set()


def record(num, title, ok, detail):
    tag = "PASS" if ok else "FAIL"
    conftest.ACCEPTANCE_LINES.append(f"[{tag}] {num}. {title}: {detail}")
    _recorded.add(num)
    return ok


@pytest.fixture(autouse=True)
def _mark_crashes(request):
    num = request.node.get_closest_marker("criterion").args[0]
    yield
    if num not in _recorded:
        conftest.ACCEPTANCE_LINES.append(f"[FAIL] {num}. did not complete ({request.node.name})")
        _recorded.add(num)


def criterion(num):
    return pytest.mark.criterion(num)


def _mean_f(masks, truth):
    fs = [score_mask(m, t).f_measure for m, t in zip(masks, truth) if t.any()]
    return float(np.mean(fs)), len(fs)


@pytest.fixture(scope="module")
def moving():
    return synth.render(scenarios.moving_object())


# ------------------------------------------------------------------ 1

@criterion("1")
def test_synthetic_end_to_end(moving):
    frames, truth, _ = moving
    cfg = Config()
    t0 = time.perf_counter()
    masks, report = segment_sequence(frames, cfg)
    elapsed = time.perf_counter() - t0
    f, n = _mean_f(masks, truth[cfg.training_frames:])
    ok = f >= 0.95 and elapsed < 60.0
    assert record("1", "synthetic end-to-end", ok,
                  f"mean F={f:.4f} over {n} object frames (need >= 0.95), "
                  f"runtime {elapsed:.1f}s (need < 60s)")


# ------------------------------------------------------------------ 2

@criterion("2")
def test_illumination_ramp():
    script = scenarios.gain_ramp()
    frames, _, _ = synth.render(script)
    masks, report = segment_sequence(frames, Config())
    worst = max(report.fg_pixel_fractions)
    assert record("2", "illumination robustness", worst < 0.02,
                  f"max foreground fraction {worst:.4f} over {len(masks)} frames "
                  f"of x1.0->x1.3 ramp (need < 0.02)")


# ------------------------------------------------------------------ 3

@criterion("3")
def test_reinitialisation():
    cfg = Config()
    frames, _, _ = synth.render(scenarios.light_switch())
    masks, report = segment_sequence(frames, cfg)
    start = cfg.training_frames
    heavy = [f >= cfg.reinit_area for f in report.fg_block_fractions]
    # independent count: first frame completing a run of `window` heavy frames
    expected, run = None, 0
    for k, h in enumerate(heavy):
        run = run + 1 if h else 0
        if run == cfg.reinit_window:
            expected = start + k
            break
    events = report.reinit_events
    exact = events[:1] == [expected] == [start + cfg.reinit_window - 1]
    after = report.fg_pixel_fractions[expected - start + 1: expected - start + 11]
    settled = min(after) < 0.05 if after else False
    first_low = next((expected + 1 + k for k, v in enumerate(after) if v < 0.05), None)
    assert record("3", "reinitialisation", exact and settled,
                  f"swap at {start}, reinit at {events} (expect [{expected}]); "
                  f"foreground < 5% from frame {first_low}, "
                  f"max over next 10 frames {max(after):.4f}")


# ------------------------------------------------------------------ 4

@criterion("4")
def test_vote_threshold_boundary(backend):
    grid = make_grid(40, 40, 8, 1)
    y = x = 20
    cover = [k for k, (i, j) in enumerate(grid.anchors)
             if i <= y < i + 8 and j <= x < j + 8]
    results = {}
    for votes in (57, 58):
        flags = np.zeros(grid.n_anchors, dtype=bool)
        flags[cover[:votes]] = True
        results[votes] = integrate(flags.reshape(grid.shape), grid)[y, x] == 255
    ok = len(cover) == 64 and results == {57: False, 58: True}
    assert record("4", f"vote threshold boundary [{backend}]", ok,
                  f"{len(cover)} covering blocks; 57/64 -> "
                  f"{'fg' if results[57] else 'bg'}, 58/64 -> {'fg' if results[58] else 'bg'}")


# ------------------------------------------------------------------ 5

@criterion("5")
def test_cascade_short_circuit(moving):
    frames, _, _ = moving
    cfg = Config(training_frames=60)
    # first 60 frames for training, then the object frames so every stage fires
    model = train(frames[:cfg.training_frames], config=cfg)
    seg = Segmenter(model, cfg)
    for f in frames[190:260]:
        seg.process(f)
    s = seg.report.stats
    blocks = seg.report.frames_processed * model.grid.n_anchors
    ok = (s.stage1_evals == blocks
          and s.stage2_evals == blocks - s.decided[STAGE1]
          and s.stage3_evals == blocks - s.decided[STAGE1] - s.decided[STAGE2]
          and s.adapt_calls == s.background_blocks
          and min(s.decided.values()) > 0)
    assert record("5", "cascade short-circuit", ok,
                  f"{blocks} blocks, decided {s.decided}; stage evals "
                  f"{s.stage1_evals}/{s.stage2_evals}/{s.stage3_evals}; "
                  f"adapt {s.adapt_calls} vs background {s.background_blocks}")


# ------------------------------------------------------------------ 6

@criterion("6")
def test_oracle_equivalences(rng):
    dct_err = 0.0
    for n in (8, 4, 5):
        for _ in range(20):
            frame = rng.uniform(0, 255, size=(n + 3, n + 5, 3))
            i, j = rng.integers(0, 4), rng.integers(0, 6)
            got = dct_block(frame, (i, j), n)
            dct_err = max(dct_err, float(np.abs(got - descriptor_direct(frame, i, j, n)).max()))
            b = dct_basis(n)
            block = frame[i:i + n, j:j + n, 0]
            dct_err = max(dct_err, float(np.abs(b @ block @ b.T - dct_direct(block)).max()))

    munkres_bad = 0
    for _ in range(200):
        n, m = rng.integers(1, 7), rng.integers(1, 7)
        pts_a = rng.uniform(0, 50, size=(n, 2))
        pts_b = rng.uniform(0, 50, size=(m, 2))
        pairs = assign(pts_a, pts_b, gate=1e9)
        cost = np.linalg.norm(pts_a[:, None] - pts_b[None], axis=2)
        if abs(sum(d for _, _, d in pairs) - brute_min_cost(cost)) > 1e-9:
            munkres_bad += 1

    mask_bad = 0
    for n, adv in [(8, 1), (8, 3), (5, 2), (4, 4)]:
        grid = make_grid(23, 19, n, adv)
        for _ in range(10):
            flags = rng.random(grid.shape) < rng.uniform(0.2, 0.9)
            if not np.array_equal(integrate(flags, grid),
                                  brute_force_mask(flags.ravel(), grid, 0.9)[0]):
                mask_bad += 1

    ok = dct_err <= 1e-9 and munkres_bad == 0 and mask_bad == 0
    assert record("6", "oracle equivalences", ok,
                  f"DCT max err {dct_err:.2e} (tol 1e-9); Munkres mismatches "
                  f"{munkres_bad}/200; mask mismatches {mask_bad}/40")


# ------------------------------------------------------------------ 7

@criterion("7")
def test_metric_identities(rng):
    truth = np.zeros((30, 30), np.uint8)
    truth[5:15, 8:20] = 255
    perfect = score_mask(truth, truth).f_measure
    noisy = np.where(rng.random((30, 30)) < 0.3, 255, 0).astype(np.uint8)
    empty = score_mask(noisy, np.zeros_like(truth)).f_measure

    gt = {t: [("p", (10.0 + t, 20.0)), ("q", (60.0, 5.0 + t))] for t in range(20)}
    perf = score_tracking(gt, gt)
    one = {t: v[:1] for t, v in gt.items()}
    fps = {t: v + [("x", (200.0, 200.0)), ("y", (300.0, 10.0))] for t, v in one.items()}
    neg = score_tracking(one, fps)
    ok = (perfect == 1.0 and empty == 0.0 and perf.mota == 1.0 and perf.motp == 0.0
          and neg.mota == -1.0)
    assert record("7", "metric identities", ok,
                  f"perfect F={perfect}, empty-truth F={empty}, perfect MOTA={perf.mota} "
                  f"MOTP={perf.motp}, 2 FP/frame MOTA={neg.mota}")


# ------------------------------------------------------------------ 8

@criterion("8")
def test_speed_accuracy_tradeoff(moving):
    frames, truth, _ = moving
    rows = bench_advances(frames, Config(), [1, 2, 4, 8], truth, repeats=3)
    fs = [f for _, f, _ in rows]
    fps = [r for _, _, r in rows]
    f_ok = all(a >= b for a, b in zip(fs, fs[1:]))
    fps_ok = all(a <= b for a, b in zip(fps, fps[1:]))
    ratio = fps[1] / fps[0]
    table = ", ".join(f"adv {a}: F={f:.3f} {r:.0f}fps" for a, f, r in rows)
    assert record("8", "speed/accuracy trade-off", f_ok and fps_ok and ratio >= 2.0,
                  f"{table}; adv2/adv1 throughput x{ratio:.2f} (need >= 2)")


# ------------------------------------------------------------------ 9

def _i2r_sequences(root):
    for seq in sorted(p for p in Path(root).iterdir() if p.is_dir()):
        if (seq / "frames").is_dir() and (seq / "truth").is_dir():
            yield seq


@criterion("9a")
def test_dataset_reproduction():
    root = os.environ.get("BLOCKCASCADE_I2R")
    if not root:
        conftest.ACCEPTANCE_LINES.append(
            "[SKIP] 9a. I2R reproduction: set BLOCKCASCADE_I2R to enable")
        _recorded.add("9a")
        pytest.skip("BLOCKCASCADE_I2R not set")
    cfg = Config()
    per_seq = {}
    for seq in _i2r_sequences(root):
        paths = imaging.list_sequence(seq / "frames")
        frames = [imaging.load_frame(p) for p in paths]
        masks, _ = segment_sequence(frames, cfg)
        scores = []
        for k, m in enumerate(masks):
            t = seq / "truth" / (paths[cfg.training_frames + k].stem + ".pgm")
            if t.exists():
                scores.append(score_mask(m, imaging.load_mask(t)).f_measure)
        if scores:
            per_seq[seq.name] = float(np.mean(scores))
    mean = float(np.mean(list(per_seq.values()))) if per_seq else float("nan")
    detail = ", ".join(f"{k}={v:.3f}" for k, v in per_seq.items())
    assert record("9a", "I2R reproduction", abs(mean - 0.78) <= 0.05,
                  f"average F={mean:.3f} (target 0.78 +/- 0.05); {detail}")


@criterion("9b")
def test_tracking_direction():
    frames, _, tracks = synth.render(scenarios.tracking())
    out = {}
    for adv in (1, 8):
        cfg = Config(advance=adv)
        masks, _ = segment_sequence(frames, cfg)
        idx = range(cfg.training_frames, len(frames))
        hyps = track_blobs(masks, cfg.gate, cfg.min_blob_area, idx)
        truth = {t: tracks[t] for t in idx}
        out[adv] = score_tracking(truth, hyps, cfg.gate)
    ok = out[1].mota >= out[8].mota
    assert record("9b", "tracking direction", ok,
                  f"MOTA adv1={out[1].mota:.4f} (MOTP {out[1].motp:.2f}px) vs "
                  f"adv8={out[8].mota:.4f} (MOTP {out[8].motp:.2f}px)")
