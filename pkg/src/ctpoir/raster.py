"""Binary PGM (P5) and PPM (P6) writers and readers.

Simplest bit-exact raster formats: a short ASCII header followed by raw
8-bit samples, no compression, so written images are reproducible byte for
byte.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import InputFormatError


def write_pgm(image: np.ndarray, path) -> None:
    if image.ndim != 2 or image.dtype != np.uint8:
        raise ValueError(f"PGM wants a 2D uint8 array, got {image.shape} {image.dtype}")
    h, w = image.shape
    Path(path).write_bytes(f"P5\n{w} {h}\n255\n".encode() + image.tobytes())


def write_ppm(image: np.ndarray, path) -> None:
    if image.ndim != 3 or image.shape[2] != 3 or image.dtype != np.uint8:
        raise ValueError(f"PPM wants a (h, w, 3) uint8 array, got {image.shape} {image.dtype}")
    h, w, _ = image.shape
    Path(path).write_bytes(f"P6\n{w} {h}\n255\n".encode() + image.tobytes())


def _read_netpbm(path, magic: bytes, channels: int) -> np.ndarray:
    data = Path(path).read_bytes()
    fields: list[bytes] = []
    pos = 0
    while len(fields) < 4:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        fields.append(data[start:pos])
    pos += 1    # single whitespace after maxval
    if fields[0] != magic:
        raise InputFormatError(f"{path}: expected {magic.decode()} file, got {fields[0]!r}")
    w, h, maxval = int(fields[1]), int(fields[2]), int(fields[3])
    if maxval != 255:
        raise InputFormatError(f"{path}: only maxval 255 is supported")
    pixels = np.frombuffer(data[pos:pos + w * h * channels], dtype=np.uint8)
    if pixels.size != w * h * channels:
        raise InputFormatError(f"{path}: truncated pixel data")
    return pixels.reshape((h, w) if channels == 1 else (h, w, channels))


def read_pgm(path) -> np.ndarray:
    return _read_netpbm(path, b"P5", 1)


def read_ppm(path) -> np.ndarray:
    return _read_netpbm(path, b"P6", 3)
