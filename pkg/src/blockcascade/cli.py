"""Command-line front end.

    blockcascade train FRAMES --model-out model.npz
    blockcascade run FRAMES --masks-out DIR [--model model.npz]
    blockcascade eval-masks MASKS TRUTH [--frames a,b,c]
    blockcascade eval-tracking MASKS TRACKS [MASKS TRACKS ...]
    blockcascade bench (FRAMES [--truth DIR] | --synthetic) [--advances 1,2,4,8]
    blockcascade synth render --script scene.txt --out DIR
"""
import argparse
import os
from pathlib import Path
import re
import shutil
import sys
import tempfile
import time

import numpy as np

from . import _accel, imaging, metrics, scenarios, synth
from .config import Config, ConfigError, load_config
from .descriptor import GridError
from .model import ModelFormatError, TrainingError, load_model, save_model, train
from .segment import Segmenter

PROG = "blockcascade"


class CommandError(Exception):
    pass


# ------------------------------------------------------------------ config

_FLAG_FIELDS = [
    ("--block-size", "block_size", int),
    ("--advance", "advance", int),
    ("--rho", "rho", float),
    ("--c1", "C1", float),
    ("--c2", "C2", float),
    ("--vote-threshold", "vote_threshold", float),
    ("--reinit-area", "reinit_area", float),
    ("--reinit-window", "reinit_window", int),
    ("--training-frames", "training_frames", int),
    ("--variance-floor", "variance_floor", float),
    ("--gate", "gate", float),
    ("--min-blob-area", "min_blob_area", int),
]


def _add_config_flags(p):
    g = p.add_argument_group("configuration (flags override --config)")
    g.add_argument("--config", type=Path, help="flat key = value file")
    for flag, dest, kind in _FLAG_FIELDS:
        g.add_argument(flag, dest=dest, type=kind, default=None)
    g.add_argument("--fps", type=float, default=None,
                   help="frame rate; sets reinit window to half a second of frames")


def _config_from(args):
    cfg = load_config(args.config) if getattr(args, "config", None) else Config()
    over = {dest: getattr(args, dest, None) for _, dest, _ in _FLAG_FIELDS}
    if getattr(args, "fps", None):
        if args.fps <= 0:
            raise ConfigError("--fps must be positive")
        over.setdefault("reinit_window", None)
        if over["reinit_window"] is None:
            over["reinit_window"] = max(1, int(round(args.fps / 2)))
    return cfg.with_overrides(**over)


# ----------------------------------------------------------------- helpers

def _frames(directory, pattern):
    paths = imaging.list_sequence(directory, pattern)
    return paths, imaging.load_sequence(directory, pattern)


def _write_masks_atomically(out_dir, named_masks):
    """Write into a scratch directory first so a failure leaves nothing behind."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    scratch = Path(tempfile.mkdtemp(prefix=".partial-", dir=out_dir))
    try:
        names = []
        for name, mask in named_masks:
            imaging.write_mask(mask, scratch / name)
            names.append(name)
        for name in names:
            os.replace(scratch / name, out_dir / name)
    finally:
        shutil.rmtree(scratch, ignore_errors=True)
    return len(names)


def _frame_number(path, fallback):
    m = re.search(r"(\d+)(?!.*\d)", Path(path).stem)
    return int(m.group(1)) if m else fallback


def _run_frames(frames, cfg, model=None):
    start = 0
    if model is None:
        if len(frames) <= cfg.training_frames:
            raise CommandError(
                f"{len(frames)} frames cannot cover {cfg.training_frames} training frames "
                "plus at least one to segment")
        model = train(frames[:cfg.training_frames], config=cfg)
        start = cfg.training_frames
    else:
        h, w = frames[0].shape[:2]
        if (model.grid.width, model.grid.height) != (w, h):
            raise CommandError(
                f"model is for {model.grid.width}x{model.grid.height} frames, input is {w}x{h}")
    seg = Segmenter(model, cfg, first_index=start)
    masks = [seg.process(f) for f in frames[start:]]
    return start, masks, seg.report


# ---------------------------------------------------------------- commands

def cmd_train(args):
    cfg = _config_from(args)
    paths, frames = _frames(args.frames, args.pattern)
    n = min(len(frames), cfg.training_frames)
    if n < 2:
        raise CommandError(f"need at least 2 training frames, found {len(frames)}")
    t0 = time.perf_counter()
    model = train(frames[:n], config=cfg)
    elapsed = time.perf_counter() - t0
    save_model(model, args.model_out)
    dom, single = model.branch_counts()
    print(f"trained on {n} frames ({paths[0].name} .. {paths[n - 1].name}) in {elapsed:.2f}s")
    print(f"anchors={len(model)} dominant_gmm={dom} single_gaussian={single}")
    print(f"model written to {args.model_out}")
    return 0


def cmd_run(args):
    cfg = _config_from(args)
    model = None
    if args.model:
        model = load_model(args.model)
        cfg = model.config if args.config is None and not _any_override(args) else cfg
        _check_geometry(model, cfg)
    paths, frames = _frames(args.frames, args.pattern)
    start, masks, report = _run_frames(frames, cfg, model)
    names = [paths[start + k].stem + ".pgm" for k in range(len(masks))]
    _write_masks_atomically(args.masks_out, zip(names, masks))
    print(f"frames_processed={report.frames_processed} first={paths[start].name}")
    events = [paths[i].name for i in report.reinit_events]
    print(f"reinit_events={','.join(events) if events else 'none'}")
    print(f"mean_fg_fraction={report.mean_fg_fraction:.6f}")
    print(f"fps={report.fps:.2f} backend={_accel.backend_name()}")
    return 0


def _any_override(args):
    return any(getattr(args, dest, None) is not None for _, dest, _ in _FLAG_FIELDS)


def _check_geometry(model, cfg):
    g = model.grid
    if (g.block_size, g.advance) != (cfg.block_size, cfg.advance):
        raise CommandError(
            f"model grid is block {g.block_size}/advance {g.advance}, configuration asks "
            f"for {cfg.block_size}/{cfg.advance}")


def _truth_pairs(masks_dir, truth_dir, frames):
    truth_dir = Path(truth_dir)
    masks_dir = Path(masks_dir)
    if not truth_dir.is_dir():
        raise CommandError(f"{truth_dir}: not a directory")
    if frames:
        stems = frames
    else:
        stems = sorted(p.stem for p in truth_dir.iterdir()
                       if p.suffix.lower() in (".pgm", ".ppm"))
    pairs = []
    for stem in stems:
        truth = [p for p in (truth_dir / f"{stem}.pgm", truth_dir / f"{stem}.ppm") if p.exists()]
        if not truth:
            raise CommandError(f"{truth_dir}: no ground truth for frame {stem!r}")
        mask = masks_dir / f"{stem}.pgm"
        if not mask.exists():
            raise CommandError(f"{masks_dir}: no mask for frame {stem!r}")
        pairs.append((stem, mask, truth[0]))
    if not pairs:
        raise CommandError(f"{truth_dir}: no ground-truth frames")
    return pairs


def _parse_frame_list(raw):
    if raw is None:
        return None
    if raw.startswith("@"):
        with open(raw[1:]) as fh:
            return [ln.strip() for ln in fh if ln.strip() and not ln.startswith("#")]
    return [s.strip() for s in raw.split(",") if s.strip()]


def cmd_eval_masks(args):
    pairs = _truth_pairs(args.masks, args.truth, _parse_frame_list(args.frames))
    scores = []
    for stem, mpath, tpath in pairs:
        s = metrics.score_mask(imaging.load_mask(mpath), imaging.load_mask(tpath))
        scores.append(s)
        print(f"{stem}: {s.line()}")
    f = np.mean([s.f_measure for s in scores])
    p = np.mean([s.precision for s in scores])
    r = np.mean([s.recall for s in scores])
    print(f"mean over {len(scores)} frames")
    print(f"F={f:.6f} P={p:.6f} R={r:.6f}")
    return 0


def _hypotheses(masks_dir, cfg, pattern):
    paths = imaging.list_sequence(masks_dir, pattern)
    idx = [_frame_number(p, k) for k, p in enumerate(paths)]
    if len(set(idx)) != len(idx):
        idx = list(range(len(paths)))
    masks = [imaging.load_mask(p) for p in paths]
    return metrics.track_blobs(masks, cfg.gate, cfg.min_blob_area, idx)


def cmd_eval_tracking(args):
    if len(args.pairs) % 2:
        raise CommandError("expected MASKS_DIR TRACKS_FILE pairs")
    cfg = _config_from(args)
    motas, motps = [], []
    for masks_dir, tracks_file in zip(args.pairs[::2], args.pairs[1::2]):
        truth = metrics.read_tracks(tracks_file)
        hyps = _hypotheses(masks_dir, cfg, args.pattern)
        lo, hi = min(hyps), max(hyps)
        truth = {t: v for t, v in truth.items() if lo <= t <= hi}
        s = metrics.score_tracking(truth, hyps, cfg.gate)
        mota = f"{100 * s.mota:.2f}%" if s.mota_defined else "undefined"
        print(f"{masks_dir}: MOTA {mota} MOTP {s.motp:.3f}px "
              f"(misses={sum(s.misses)} fp={sum(s.false_positives)} "
              f"mme={sum(s.mismatches)} gt={sum(s.ground_truth)})")
        if s.mota_defined:
            motas.append(s.mota)
        if s.motp_defined:
            motps.append(s.motp)
    mota = f"{np.mean(motas):.6f}" if motas else "undefined"
    motp = f"{np.mean(motps):.6f}" if motps else "undefined"
    print(f"MOTA={mota} MOTP={motp}")
    return 0


def bench_advances(frames, cfg, advances, truth=None, repeats=1):
    """Train and segment once per advance; returns rows of (advance, F or None, fps)."""
    rows = []
    for adv in advances:
        c = cfg.with_overrides(advance=adv)
        model = train(frames[:c.training_frames], config=c)
        fps = 0.0
        for _ in range(repeats):
            seg = Segmenter(model.copy(), c, first_index=c.training_frames)
            masks = [seg.process(f) for f in frames[c.training_frames:]]
            fps = max(fps, seg.report.fps)
        f = None
        if truth is not None:
            fs = [metrics.score_mask(m, truth[c.training_frames + k]).f_measure
                  for k, m in enumerate(masks)
                  if truth[c.training_frames + k] is not None
                  and truth[c.training_frames + k].any()]
            f = float(np.mean(fs)) if fs else None
        rows.append((adv, f, fps))
    return rows


def cmd_bench(args):
    cfg = _config_from(args)
    advances = [int(a) for a in args.advances.split(",")]
    if args.synthetic:
        frames, truth, _ = synth.render(scenarios.moving_object())
        label = "synthetic moving-object scene"
    else:
        if args.frames is None:
            raise CommandError("give a frames directory or --synthetic")
        paths, frames = _frames(args.frames, args.pattern)
        truth = None
        if args.truth:
            truth = []
            for p in paths:
                t = [q for q in (Path(args.truth) / f"{p.stem}.pgm",
                                 Path(args.truth) / f"{p.stem}.ppm") if q.exists()]
                truth.append(imaging.load_mask(t[0]) if t else None)
        label = str(args.frames)
    if len(frames) <= cfg.training_frames:
        raise CommandError(f"{len(frames)} frames leave nothing to segment after training")
    print(f"# {label}, block {cfg.block_size}, backend {_accel.backend_name()}")
    print(f"{'advance':>7} {'F-measure':>10} {'fps':>10}")
    for adv, f, fps in bench_advances(frames, cfg, advances, truth, args.repeats):
        fs = f"{f:.4f}" if f is not None else "-"
        print(f"{adv:>7} {fs:>10} {fps:>10.1f}")
    return 0


def cmd_synth_render(args):
    script = synth.load_script(args.script)
    frames, masks, tracks = synth.render(script)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "truth").mkdir(exist_ok=True)
    for t, (f, m) in enumerate(zip(frames, masks)):
        imaging.write_frame(f, out / f"frame_{t:05d}.ppm")
        imaging.write_mask(m, out / "truth" / f"frame_{t:05d}.pgm")
    metrics.write_tracks(tracks, out / "tracks.txt")
    print(f"wrote {len(frames)} frames, masks and tracks to {out}")
    return 0


# ------------------------------------------------------------------ parser

def build_parser():
    p = argparse.ArgumentParser(prog=PROG, description=__doc__.split("\n")[0] or None)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("train", help="bootstrap a background model")
    s.add_argument("frames", type=Path)
    s.add_argument("--model-out", type=Path, required=True)
    s.add_argument("--pattern", default="*.ppm")
    _add_config_flags(s)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("run", help="segment a sequence into masks")
    s.add_argument("frames", type=Path)
    s.add_argument("--masks-out", type=Path, required=True)
    s.add_argument("--model", type=Path, help="trained model; omit to train inline")
    s.add_argument("--pattern", default="*.ppm")
    _add_config_flags(s)
    s.set_defaults(func=cmd_run)

    s = sub.add_parser("eval-masks", help="F-measure against ground-truth masks")
    s.add_argument("masks", type=Path)
    s.add_argument("truth", type=Path)
    s.add_argument("--frames", help="comma-separated frame stems, or @file with one per line")
    s.set_defaults(func=cmd_eval_masks)

    s = sub.add_parser("eval-tracking", help="MOTA / MOTP of blob tracks from masks")
    s.add_argument("pairs", nargs="+", metavar="MASKS_DIR TRACKS_FILE")
    s.add_argument("--pattern", default="*.pgm")
    _add_config_flags(s)
    s.set_defaults(func=cmd_eval_tracking)

    s = sub.add_parser("bench", help="speed / accuracy versus block advance")
    s.add_argument("frames", type=Path, nargs="?")
    s.add_argument("--synthetic", action="store_true")
    s.add_argument("--truth", type=Path)
    s.add_argument("--advances", default="1,2,4,8")
    s.add_argument("--repeats", type=int, default=1)
    s.add_argument("--pattern", default="*.ppm")
    _add_config_flags(s)
    s.set_defaults(func=cmd_bench)

    s = sub.add_parser("synth", help="synthetic sequences")
    ssub = s.add_subparsers(dest="synth_command", required=True)
    r = ssub.add_parser("render", help="render a scene script to frames, masks and tracks")
    r.add_argument("--script", type=Path, required=True)
    r.add_argument("--out", type=Path, required=True)
    r.set_defaults(func=cmd_synth_render)
    return p


_EXPECTED = (CommandError, ConfigError, GridError, TrainingError, ModelFormatError,
             imaging.DecodeError, imaging.SequenceError, imaging.MaskError,
             metrics.TrackFormatError, synth.ScriptError, FileNotFoundError,
             IsADirectoryError, PermissionError)


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except _EXPECTED as exc:
        print(f"{PROG}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
