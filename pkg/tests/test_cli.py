import filecmp

import numpy as np
import pytest

from blockcascade import imaging
from blockcascade.cli import build_parser, main
from blockcascade.config import Config
from blockcascade.model import load_model

SCRIPT = """
[scene]
width = 48
height = 40
length = 36
noise_sigma = 2
seed = 1
background = textured
background_color = 90,110,130

[object a]
x = 2
y = 10
w = 10
h = 10
velocity = 1,0
enter = 24
"""


@pytest.fixture(scope="module")
def seq(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    (root / "scene.txt").write_text(SCRIPT)
    assert main(["synth", "render", "--script", str(root / "scene.txt"),
                 "--out", str(root / "seq")]) == 0
    return root


def _lines(capsys):
    return capsys.readouterr().out.strip().splitlines()


def test_synth_render_layout(seq):
    frames = sorted((seq / "seq").glob("*.ppm"))
    truth = sorted((seq / "seq" / "truth").glob("*.pgm"))
    assert len(frames) == len(truth) == 36
    assert (seq / "seq" / "tracks.txt").exists()
    assert imaging.load_frame(frames[0]).shape == (40, 48, 3)


def test_train_writes_model_and_branch_counts(seq, capsys, tmp_path):
    out = tmp_path / "m.npz"
    assert main(["train", str(seq / "seq"), "--model-out", str(out),
                 "--training-frames", "20"]) == 0
    text = "\n".join(_lines(capsys))
    assert "dominant_gmm=" in text and "single_gaussian=" in text
    model = load_model(out)
    dom, single = model.branch_counts()
    assert f"dominant_gmm={dom} single_gaussian={single}" in text
    assert model.config.training_frames == 20


def test_run_inline_writes_one_mask_per_frame_past_training(seq, capsys, tmp_path):
    out = tmp_path / "masks"
    assert main(["run", str(seq / "seq"), "--masks-out", str(out),
                 "--training-frames", "20"]) == 0
    names = sorted(p.name for p in out.iterdir())
    assert names == [f"frame_{t:05d}.pgm" for t in range(20, 36)]
    lines = _lines(capsys)
    assert lines[0].startswith("frames_processed=16")
    assert any(ln.startswith("fps=") for ln in lines)
    assert any(ln.startswith("mean_fg_fraction=") for ln in lines)


def test_run_is_deterministic(seq, tmp_path):
    for name in ("a", "b"):
        assert main(["run", str(seq / "seq"), "--masks-out", str(tmp_path / name),
                     "--training-frames", "20"]) == 0
    files = sorted(p.name for p in (tmp_path / "a").iterdir())
    match, mismatch, errors = filecmp.cmpfiles(tmp_path / "a", tmp_path / "b", files,
                                               shallow=False)
    assert mismatch == [] and errors == [] and len(match) == 16


def test_run_with_saved_model_covers_every_frame(seq, tmp_path, capsys):
    model = tmp_path / "m.npz"
    main(["train", str(seq / "seq"), "--model-out", str(model), "--training-frames", "20"])
    capsys.readouterr()
    assert main(["run", str(seq / "seq"), "--model", str(model),
                 "--masks-out", str(tmp_path / "masks")]) == 0
    assert len(list((tmp_path / "masks").iterdir())) == 36


def test_eval_masks_perfect_and_frame_list(seq, tmp_path, capsys):
    truth = seq / "seq" / "truth"
    assert main(["eval-masks", str(truth), str(truth),
                 "--frames", "frame_00030,frame_00031"]) == 0
    lines = _lines(capsys)
    assert lines[-1] == "F=1.000000 P=1.000000 R=1.000000"
    assert len(lines) == 4


def test_eval_masks_frame_list_file(seq, tmp_path, capsys):
    truth = seq / "seq" / "truth"
    listing = tmp_path / "frames.txt"
    listing.write_text("# frames\nframe_00000\n")
    assert main(["eval-masks", str(truth), str(truth), "--frames", f"@{listing}"]) == 0
    # empty truth: F is zero by convention
    assert _lines(capsys)[-1] == "F=0.000000 P=0.000000 R=0.000000"


def test_eval_tracking_truth_masks_is_perfect(seq, capsys):
    assert main(["eval-tracking", str(seq / "seq" / "truth"),
                 str(seq / "seq" / "tracks.txt")]) == 0
    assert _lines(capsys)[-1] == "MOTA=1.000000 MOTP=0.000000"


def test_eval_tracking_needs_pairs(seq, capsys):
    assert main(["eval-tracking", str(seq / "seq" / "truth")]) == 2
    assert "pairs" in capsys.readouterr().err


def test_bench_table(seq, capsys):
    assert main(["bench", str(seq / "seq"), "--truth", str(seq / "seq" / "truth"),
                 "--training-frames", "20", "--advances", "1,8"]) == 0
    rows = [ln.split() for ln in _lines(capsys)[2:]]
    assert [r[0] for r in rows] == ["1", "8"]
    assert all(0.0 <= float(r[1]) <= 1.0 and float(r[2]) > 0 for r in rows)


def test_config_file_and_flag_precedence(tmp_path):
    cfg = tmp_path / "c.conf"
    cfg.write_text("rho = 0.05\nadvance = 2\n")
    from blockcascade.cli import _config_from
    args = build_parser().parse_args(
        ["run", "x", "--masks-out", "y", "--config", str(cfg), "--advance", "4"])
    c = _config_from(args)
    assert (c.rho, c.advance) == (0.05, 4)
    args = build_parser().parse_args(["run", "x", "--masks-out", "y"])
    assert _config_from(args) == Config()


def test_fps_sets_reinit_window():
    from blockcascade.cli import _config_from
    args = build_parser().parse_args(["run", "x", "--masks-out", "y", "--fps", "30"])
    assert _config_from(args).reinit_window == 15
    args = build_parser().parse_args(
        ["run", "x", "--masks-out", "y", "--fps", "30", "--reinit-window", "4"])
    assert _config_from(args).reinit_window == 4


@pytest.mark.parametrize("argv, needle", [
    (["run", "{missing}", "--masks-out", "{out}"], "not a directory"),
    (["run", "{seq}", "--masks-out", "{out}", "--c1", "0.0001"], "C2"),
    (["run", "{seq}", "--masks-out", "{out}"], "training"),
    (["train", "{seq}", "--model-out", "{out}/m.npz", "--block-size", "64"], ""),
    (["eval-masks", "{seq}", "{seq}/truth"], "no mask"),
    (["synth", "render", "--script", "{missing}", "--out", "{out}"], ""),
])
def test_errors_exit_nonzero_with_one_line(seq, tmp_path, capsys, argv, needle):
    sub = {"missing": str(tmp_path / "nope"), "out": str(tmp_path / "out"),
           "seq": str(seq / "seq")}
    (tmp_path / "out").mkdir()
    rc = main([a.format(**sub) for a in argv])
    err = capsys.readouterr().err.strip()
    assert rc != 0
    assert len(err.splitlines()) == 1 and err.startswith("blockcascade: error:")
    assert needle in err
    assert not list((tmp_path / "out").iterdir())


def test_dimension_mismatch_between_model_and_frames(seq, tmp_path, capsys):
    model = tmp_path / "m.npz"
    main(["train", str(seq / "seq"), "--model-out", str(model), "--training-frames", "20"])
    other = tmp_path / "other"
    other.mkdir()
    imaging.write_frame(np.zeros((16, 16, 3), np.uint8), other / "f.ppm")
    capsys.readouterr()
    assert main(["run", str(other), "--model", str(model),
                 "--masks-out", str(tmp_path / "m")]) == 2
    assert "48x40" in capsys.readouterr().err
    assert not (tmp_path / "m").exists() or not list((tmp_path / "m").iterdir())
