"""Binary netpbm I/O for frames and masks.

Frames are ``(height, width, 3)`` uint8 arrays, masks are ``(height, width)``
uint8 arrays holding only 0 and 255. Only the raw variants are handled:
P6 (colour) and P5 (grey), both with maxval 255. Grey frames are replicated
into three channels on load so the descriptor always sees r, g, b.
"""
from pathlib import Path
import fnmatch
import os

import numpy as np

__all__ = [
    "DecodeError",
    "HeaderError",
    "TruncatedError",
    "UnsupportedMaxvalError",
    "SequenceError",
    "MaskError",
    "load_frame",
    "load_mask",
    "load_sequence",
    "list_sequence",
    "write_mask",
    "write_frame",
    "check_mask",
]

_WHITESPACE = b" \t\n\r\v\f"


class DecodeError(ValueError):
    """Base class for netpbm decoding failures."""


class HeaderError(DecodeError):
    """Bad magic number or unparsable header field."""


class TruncatedError(DecodeError):
    """Payload shorter than the header promises."""


class UnsupportedMaxvalError(DecodeError):
    """maxval other than 255."""


class SequenceError(ValueError):
    pass


class MaskError(ValueError):
    pass


def _read_header(buf, path):
    magic = buf[:2]
    if magic not in (b"P5", b"P6"):
        raise HeaderError(f"{path}: unsupported magic {magic!r} (expected P5 or P6)")
    pos = 2
    fields = []
    while len(fields) < 3:
        # whitespace and comments may separate header tokens
        while pos < len(buf) and (buf[pos] in _WHITESPACE or buf[pos] == ord("#")):
            if buf[pos] == ord("#"):
                eol = buf.find(b"\n", pos)
                pos = len(buf) if eol < 0 else eol + 1
            else:
                pos += 1
        start = pos
        while pos < len(buf) and buf[pos] not in _WHITESPACE and buf[pos] != ord("#"):
            pos += 1
        token = buf[start:pos]
        if not token:
            raise HeaderError(f"{path}: header ends before width/height/maxval")
        if not token.isdigit():
            raise HeaderError(f"{path}: non-numeric header field {token!r}")
        fields.append(int(token))
    if pos >= len(buf) or buf[pos] not in _WHITESPACE:
        raise HeaderError(f"{path}: missing whitespace after maxval")
    pos += 1
    width, height, maxval = fields
    if width <= 0 or height <= 0:
        raise HeaderError(f"{path}: non-positive dimensions {width}x{height}")
    if maxval != 255:
        raise UnsupportedMaxvalError(f"{path}: maxval {maxval} not supported (only 255)")
    return magic, width, height, pos


def _decode(buf, path):
    magic, width, height, offset = _read_header(buf, path)
    channels = 3 if magic == b"P6" else 1
    need = width * height * channels
    payload = buf[offset:offset + need]
    if len(payload) < need:
        raise TruncatedError(
            f"{path}: payload has {len(payload)} bytes, header promises {need}"
        )
    arr = np.frombuffer(payload, dtype=np.uint8)
    if channels == 3:
        return magic, arr.reshape(height, width, 3).copy()
    return magic, arr.reshape(height, width).copy()


def load_frame(path):
    """Decode a P6 or P5 file into an ``(H, W, 3)`` uint8 frame."""
    path = Path(path)
    _, img = _decode(path.read_bytes(), path)
    if img.ndim == 2:
        img = np.repeat(img[:, :, None], 3, axis=2)
    return img


def load_mask(path):
    """Load a ground-truth or predicted mask; any nonzero value is foreground."""
    path = Path(path)
    _, img = _decode(path.read_bytes(), path)
    if img.ndim == 3:
        img = img.max(axis=2)
    return np.where(img > 0, 255, 0).astype(np.uint8)


def list_sequence(directory, pattern="*.ppm"):
    directory = Path(directory)
    if not directory.is_dir():
        raise SequenceError(f"{directory}: not a directory")
    names = sorted(n for n in os.listdir(directory) if fnmatch.fnmatchcase(n, pattern))
    if not names:
        raise SequenceError(f"{directory}: no files match {pattern!r}")
    return [directory / n for n in names]


def load_sequence(directory, pattern="*.ppm"):
    """Load every matching frame in lexicographic filename order."""
    frames = []
    for path in list_sequence(directory, pattern):
        frame = load_frame(path)
        if frames and frame.shape != frames[0].shape:
            h0, w0 = frames[0].shape[:2]
            h, w = frame.shape[:2]
            raise SequenceError(f"{path}: frame is {w}x{h}, sequence is {w0}x{h0}")
        frames.append(frame)
    return frames


def check_mask(mask):
    mask = np.asarray(mask)
    if mask.ndim != 2 or mask.dtype != np.uint8:
        raise MaskError(f"mask must be a 2-D uint8 array, got {mask.dtype} {mask.shape}")
    if not np.all((mask == 0) | (mask == 255)):
        raise MaskError("mask values must be 0 or 255")
    return mask


def write_mask(mask, path):
    """Write a binary mask as P5 with maxval 255."""
    mask = check_mask(mask)
    h, w = mask.shape
    with open(path, "wb") as fh:
        fh.write(b"P5\n%d %d\n255\n" % (w, h))
        fh.write(np.ascontiguousarray(mask).tobytes())


def write_frame(frame, path):
    frame = np.asarray(frame, dtype=np.uint8)
    if frame.ndim != 3 or frame.shape[2] != 3:
        raise ValueError(f"frame must be (H, W, 3), got {frame.shape}")
    h, w = frame.shape[:2]
    with open(path, "wb") as fh:
        fh.write(b"P6\n%d %d\n255\n" % (w, h))
        fh.write(np.ascontiguousarray(frame).tobytes())
