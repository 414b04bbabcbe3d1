"""Compare the numba kernels against their pure-numpy twins.

    python3 benchmarks/bench_backends.py [--width 160 --height 120 --advance 1]

Each kernel is timed on the same inputs under both backends (best of
``--repeats``) and the largest output disagreement is reported alongside.
"""
import argparse
import timeit

import numpy as np

from blockcascade import _accel, kernels, scenarios, synth
from blockcascade.config import Config
from blockcascade.descriptor import _low_basis, make_grid
from blockcascade.model import _banded_samples, train


def _best(fn, repeats):
    fn()  # warm-up (and JIT compile)
    return min(timeit.repeat(fn, number=1, repeat=repeats))


def _cascade_inputs(model, desc):
    def fresh():
        return (desc, model.mu.copy(), model.var.copy(), model.log_threshold.copy(),
                model.prev_descriptor.copy(), model.prev_label.copy(),
                model.config.C1, model.config.C2, model.config.rho,
                model.config.variance_floor, np.zeros(4, np.int64))
    return fresh


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--width", type=int, default=160)
    ap.add_argument("--height", type=int, default=120)
    ap.add_argument("--advance", type=int, default=1)
    ap.add_argument("--repeats", type=int, default=5)
    ap.add_argument("--em-frames", type=int, default=60)
    args = ap.parse_args(argv)
    if not _accel.HAVE_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")

    script = scenarios.moving_object(length=args.em_frames + 40, enter=args.em_frames + 10)
    script.width, script.height = args.width, args.height
    frames, _, _ = synth.render(script)
    cfg = Config(advance=args.advance, training_frames=args.em_frames)
    grid = make_grid(args.width, args.height, cfg.block_size, cfg.advance)
    model = train(frames[:args.em_frames], grid, cfg)
    img = np.ascontiguousarray(frames[-1], dtype=np.float64)
    basis = _low_basis(cfg.block_size)
    desc = kernels.block_descriptors_nb(img, grid.rows, grid.cols, basis)
    flags = kernels.cascade_step_nb(*_cascade_inputs(model, desc)())[0] == kernels.FG
    flags = flags.reshape(grid.shape)
    _, band = next(iter(_banded_samples(frames[:args.em_frames], grid)))

    cases = {
        "block_descriptors": lambda k: k(img, grid.rows, grid.cols, basis),
        "cascade_step": lambda k: k(*_cascade_inputs(model, desc)())[0],
        "accumulate_votes": lambda k: k(flags, grid.rows, grid.cols, grid.block_size,
                                        grid.height, grid.width),
        "log_threshold": lambda k: k(model.mu, model.var),
        "em_fit (one band)": lambda k: k(band, cfg.variance_floor, cfg.em_max_iter,
                                         cfg.em_tol)[0],
    }
    print(f"# {args.width}x{args.height}, block {cfg.block_size}, advance {cfg.advance}, "
          f"{grid.n_anchors} anchors; EM band {band.shape}")
    print(f"{'kernel':<20} {'numpy ms':>10} {'numba ms':>10} {'speedup':>8} {'max diff':>10}")
    for name, call in cases.items():
        base = name.split()[0]
        k_np = getattr(kernels, base + "_np")
        k_nb = getattr(kernels, base + "_nb")
        t_np = _best(lambda: call(k_np), args.repeats)
        t_nb = _best(lambda: call(k_nb), args.repeats)
        diff = float(np.max(np.abs(np.asarray(call(k_np), float) - np.asarray(call(k_nb), float))))
        print(f"{name:<20} {1e3 * t_np:>10.2f} {1e3 * t_nb:>10.2f} "
              f"{t_np / t_nb:>7.1f}x {diff:>10.2e}")


if __name__ == "__main__":
    main()
