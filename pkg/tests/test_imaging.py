import numpy as np
import pytest

from blockcascade import imaging


def _write(path, data):
    path.write_bytes(data)
    return path


def test_p6_constant_roundtrip(tmp_path):
    p = _write(tmp_path / "a.ppm", b"P6\n2 2\n255\n" + bytes([10, 20, 30]) * 4)
    img = imaging.load_frame(p)
    assert img.shape == (2, 2, 3)
    assert img.dtype == np.uint8
    assert (img == np.array([10, 20, 30])).all()


def test_p5_replicated_to_three_channels(tmp_path):
    p = _write(tmp_path / "g.pgm", b"P5 1 1 255\n" + bytes([7]))
    assert imaging.load_frame(p).tolist() == [[[7, 7, 7]]]


def test_header_comments_are_skipped(tmp_path):
    p = _write(tmp_path / "c.ppm", b"P6\n# made by hand\n1 1\n# another\n255\n" + bytes([1, 2, 3]))
    assert imaging.load_frame(p).tolist() == [[[1, 2, 3]]]


def test_payload_bytes_are_not_mistaken_for_whitespace(tmp_path):
    # first payload byte is '\n'; only a single whitespace follows maxval
    p = _write(tmp_path / "w.pgm", b"P5\n2 1\n255\n" + bytes([10, 32]))
    assert imaging.load_frame(p)[0, :, 0].tolist() == [10, 32]


@pytest.mark.parametrize("data, exc", [
    (b"P3\n1 1\n255\n1 2 3", imaging.HeaderError),
    (b"P6\n1 x\n255\n\x00\x00\x00", imaging.HeaderError),
    (b"P6\n1 1\n", imaging.HeaderError),
    (b"P6\n2 2\n255\n\x00\x00\x00", imaging.TruncatedError),
    (b"P6\n1 1\n65535\n\x00\x00\x00\x00\x00\x00", imaging.UnsupportedMaxvalError),
    (b"P5\n1 1\n15\n\x00", imaging.UnsupportedMaxvalError),
])
def test_decode_errors_are_distinct(tmp_path, data, exc):
    p = _write(tmp_path / "bad.ppm", data)
    with pytest.raises(exc):
        imaging.load_frame(p)


def test_mask_roundtrip_is_byte_exact(tmp_path, rng):
    for k in range(100):
        h, w = rng.integers(1, 40, size=2)
        mask = np.where(rng.random((h, w)) < 0.5, 255, 0).astype(np.uint8)
        path = tmp_path / f"m{k}.pgm"
        imaging.write_mask(mask, path)
        raw = path.read_bytes()
        assert raw.endswith(mask.tobytes())
        assert raw.startswith(b"P5")
        back = imaging.load_mask(path)
        assert back.tobytes() == mask.tobytes()


def test_write_mask_rejects_non_binary(tmp_path):
    with pytest.raises(imaging.MaskError):
        imaging.write_mask(np.full((2, 2), 7, np.uint8), tmp_path / "x.pgm")


def test_load_mask_treats_nonzero_as_foreground(tmp_path):
    p = _write(tmp_path / "t.pgm", b"P5\n3 1\n255\n" + bytes([0, 1, 200]))
    assert imaging.load_mask(p).tolist() == [[0, 255, 255]]


def test_sequence_order_is_lexicographic(tmp_path):
    # written out of order; the loader must sort by name
    for name, v in [("f10.ppm", 3), ("f02.ppm", 1), ("f05.ppm", 2)]:
        imaging.write_frame(np.full((2, 2, 3), v, np.uint8), tmp_path / name)
    frames = imaging.load_sequence(tmp_path, "*.ppm")
    assert [int(f[0, 0, 0]) for f in frames] == [1, 2, 3]


def test_sequence_dimension_mismatch_names_file(tmp_path):
    imaging.write_frame(np.zeros((2, 2, 3), np.uint8), tmp_path / "a.ppm")
    imaging.write_frame(np.zeros((3, 2, 3), np.uint8), tmp_path / "b.ppm")
    with pytest.raises(imaging.SequenceError, match="b.ppm"):
        imaging.load_sequence(tmp_path)


def test_empty_sequence(tmp_path):
    with pytest.raises(imaging.SequenceError):
        imaging.load_sequence(tmp_path, "*.ppm")
