"""Binary PGM (P5) / PPM (P6) reader and writer, maxval 255 only."""
from __future__ import annotations

import os

import numpy as np


class PnmError(ValueError):
    pass


def _tokens(data: bytes, count: int):
    """Read ``count`` whitespace-separated header tokens, skipping comments.

    Returns the tokens and the offset just past the single whitespace
    byte that terminates the last token.
    """
    toks = []
    i = 0
    n = len(data)
    while len(toks) < count:
        while i < n and data[i : i + 1].isspace():
            i += 1
        if i < n and data[i : i + 1] == b"#":
            while i < n and data[i : i + 1] not in (b"\n", b"\r"):
                i += 1
            continue
        start = i
        while i < n and not data[i : i + 1].isspace() and data[i : i + 1] != b"#":
            i += 1
        if start == i:
            raise PnmError("malformed header: unexpected end of file")
        toks.append(data[start:i])
    if i >= n or not data[i : i + 1].isspace():
        raise PnmError("malformed header: missing whitespace after maxval")
    return toks, i + 1


def decode_pnm(data: bytes) -> np.ndarray:
    magic = data[:2]
    if magic not in (b"P5", b"P6"):
        raise PnmError(f"malformed header: unsupported magic {magic!r}")
    toks, offset = _tokens(data[2:], 3)
    offset += 2
    try:
        width, height, maxval = (int(t) for t in toks)
    except ValueError:
        raise PnmError("malformed header: non-numeric field") from None
    if width < 1 or height < 1:
        raise PnmError("malformed header: empty image")
    if maxval != 255:
        raise PnmError(f"unsupported maxval {maxval} (only 255)")
    channels = 1 if magic == b"P5" else 3
    expected = width * height * channels
    body = data[offset : offset + expected]
    if len(body) < expected:
        raise PnmError(f"truncated data: expected {expected} bytes, got {len(body)}")
    a = np.frombuffer(body, dtype=np.uint8)
    shape = (height, width) if channels == 1 else (height, width, 3)
    return a.reshape(shape).copy()


def encode_pnm(img) -> bytes:
    a = np.asarray(img)
    if a.dtype != np.uint8:
        a = a.astype(np.uint8)
    if a.ndim == 2:
        magic = b"P5"
    elif a.ndim == 3 and a.shape[2] == 3:
        magic = b"P6"
    else:
        raise PnmError(f"cannot encode array of shape {a.shape}")
    h, w = a.shape[:2]
    return magic + b"\n%d %d\n255\n" % (w, h) + np.ascontiguousarray(a).tobytes()


def load_pnm(path: str | os.PathLike) -> np.ndarray:
    with open(path, "rb") as fh:
        return decode_pnm(fh.read())


def save_pnm(img, path: str | os.PathLike) -> None:
    with open(path, "wb") as fh:
        fh.write(encode_pnm(img))
