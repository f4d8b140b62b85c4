"""Binary PPM (P6, maxval 255) reading and writing for H x W x 3 float images."""

from __future__ import annotations

import os
import re

import numpy as np

from .validation import check_image


class ImageFormatError(ValueError):
    pass


_TOKEN = re.compile(rb"\s*(?:#[^\n]*\n\s*)*(\S+)")


def encode_ppm(img: np.ndarray) -> bytes:
    img = check_image(img, clip_tol=np.inf)
    h, w, _ = img.shape
    payload = np.clip(np.floor(img * 255.0 + 0.5), 0, 255).astype(np.uint8)
    return b"P6\n%d %d\n255\n" % (w, h) + payload.tobytes()


def decode_ppm(raw: bytes) -> np.ndarray:
    fields = []
    pos = 0
    for _ in range(4):
        m = _TOKEN.match(raw, pos)
        if m is None:
            raise ImageFormatError("malformed PPM header")
        fields.append(m.group(1))
        pos = m.end()
    magic, *nums = fields
    if magic != b"P6":
        raise ImageFormatError(f"unsupported PPM magic {magic!r}; expected b'P6'")
    try:
        w, h, maxval = (int(x) for x in nums)
    except ValueError:
        raise ImageFormatError("malformed PPM header: non-integer field") from None
    if w <= 0 or h <= 0:
        raise ImageFormatError(f"invalid PPM size {w}x{h}")
    if maxval != 255:
        raise ImageFormatError(f"unsupported PPM maxval {maxval}; only 255 is supported")
    if pos >= len(raw) or not raw[pos : pos + 1].isspace():
        raise ImageFormatError("malformed PPM header: missing whitespace before payload")
    payload = raw[pos + 1 :]
    need = w * h * 3
    if len(payload) < need:
        raise ImageFormatError(f"truncated PPM payload: {len(payload)} of {need} bytes")
    return np.frombuffer(payload[:need], dtype=np.uint8).reshape(h, w, 3).astype(np.float64) / 255.0


def load_image(path: str | os.PathLike) -> np.ndarray:
    with open(path, "rb") as fh:
        raw = fh.read()
    try:
        return decode_ppm(raw)
    except ImageFormatError as err:
        raise ImageFormatError(f"{path}: {err}") from None


def save_image(img: np.ndarray, path: str | os.PathLike) -> None:
    data = encode_ppm(img)
    with open(path, "wb") as fh:
        fh.write(data)


def gray_to_rgb(values: np.ndarray) -> np.ndarray:
    return np.repeat(np.asarray(values, dtype=np.float64)[..., None], 3, axis=-1)
