"""Sequence and image I/O.

Sequences travel as CSV (one value per line) or raw little-endian float64
with an 8-byte little-endian length header.  Gray-scale images use binary
PGM (P5, maxval 255); real-valued noisy images use .npy.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np


class SequenceFormatError(ValueError):
    pass


class PgmFormatError(ValueError):
    """PGM parse failure; message carries the offending byte offset."""


def save_sequence_csv(path, values):
    values = np.asarray(values, dtype=float).reshape(-1)
    np.savetxt(path, values, fmt="%.17g")


def load_sequence_csv(path):
    try:
        values = np.loadtxt(path, dtype=float, ndmin=1)
    except ValueError as exc:
        raise SequenceFormatError(f"{path}: {exc}") from exc
    if values.ndim != 1:
        raise SequenceFormatError(f"{path}: expected one value per line")
    return values


def save_sequence_binary(path, values):
    values = np.asarray(values, dtype="<f8").reshape(-1)
    with open(path, "wb") as fh:
        fh.write(struct.pack("<Q", values.size))
        fh.write(values.tobytes())


def load_sequence_binary(path):
    raw = Path(path).read_bytes()
    if len(raw) < 8:
        raise SequenceFormatError(f"{path}: missing 8-byte length header")
    (count,) = struct.unpack_from("<Q", raw)
    expected = 8 + 8 * count
    if len(raw) != expected:
        raise SequenceFormatError(
            f"{path}: header promises {count} values ({expected} bytes), "
            f"file has {len(raw)} bytes")
    return np.frombuffer(raw, dtype="<f8", offset=8, count=count).copy()


def load_sequence(path):
    """Dispatch on extension: .csv/.txt are text, anything else is binary."""
    suffix = Path(path).suffix.lower()
    if suffix in (".csv", ".txt"):
        return load_sequence_csv(path)
    return load_sequence_binary(path)


def save_sequence(path, values):
    suffix = Path(path).suffix.lower()
    if suffix in (".csv", ".txt"):
        save_sequence_csv(path, values)
    else:
        save_sequence_binary(path, values)


# ---------------------------------------------------------------------------
# PGM (P5)


def _next_token(data, pos):
    """Whitespace/comment-aware tokenizer over the PGM header bytes."""
    n = len(data)
    while pos < n:
        c = data[pos]
        if c in b" \t\r\n":
            pos += 1
        elif c == ord("#"):
            while pos < n and data[pos] not in b"\r\n":
                pos += 1
        else:
            break
    if pos >= n:
        raise PgmFormatError(f"unexpected end of header at byte offset {pos}")
    start = pos
    while pos < n and data[pos] not in b" \t\r\n":
        pos += 1
    return data[start:pos], pos


def load_pgm(path):
    data = Path(path).read_bytes()
    if data[:2] != b"P5":
        raise PgmFormatError(f"{path}: not a binary PGM (magic at byte offset 0)")
    pos = 2
    fields = []
    for _ in range(3):
        token, pos = _next_token(data, pos)
        try:
            fields.append(int(token))
        except ValueError:
            raise PgmFormatError(
                f"{path}: non-numeric header token {token!r} at byte offset "
                f"{pos - len(token)}") from None
    width, height, maxval = fields
    if width <= 0 or height <= 0:
        raise PgmFormatError(f"{path}: bad dimensions {width}x{height}")
    if maxval != 255:
        raise PgmFormatError(f"{path}: only maxval 255 is supported, got {maxval}")
    if pos >= len(data) or data[pos] not in b" \t\r\n":
        raise PgmFormatError(f"{path}: missing whitespace after header at "
                             f"byte offset {pos}")
    pos += 1  # single whitespace byte separates header from raster
    expected = width * height
    raster = data[pos:pos + expected]
    if len(raster) != expected:
        raise PgmFormatError(
            f"{path}: raster truncated at byte offset {pos + len(raster)} "
            f"(expected {expected} pixels)")
    return np.frombuffer(raster, dtype=np.uint8).reshape(height, width).copy()


def save_pgm(path, image):
    image = np.asarray(image)
    if image.ndim != 2:
        raise PgmFormatError("image must be 2-dimensional")
    pixels = np.clip(np.rint(image), 0, 255).astype(np.uint8)
    height, width = pixels.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{width} {height}\n255\n".encode("ascii"))
        fh.write(pixels.tobytes())


def load_image_npy(path):
    image = np.load(path)
    if image.ndim != 2:
        raise SequenceFormatError(f"{path}: expected a 2D array")
    return image.astype(float)


def save_image_npy(path, image):
    np.save(path, np.asarray(image, dtype=float))
