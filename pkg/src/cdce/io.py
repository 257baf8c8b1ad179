"""Readers and writers: PGM/PNG images and motion-field CSV files."""

from __future__ import annotations

import csv
import re
from pathlib import Path

import numpy as np
from PIL import Image as PILImage, UnidentifiedImageError

from .core import GroundTruth, MotionField, as_image
from .errors import ParseError, UnsupportedFormat

_PGM_HEADER = re.compile(rb"\AP5(?:\s+|#[^\n]*\n)+?(\d+)(?:\s+|#[^\n]*\n)+?(\d+)(?:\s+|#[^\n]*\n)+?(\d+)\s")


def _guess_format(path: Path, head: bytes) -> str:
    if head.startswith(b"P5"):
        return "pgm"
    if head.startswith(b"\x89PNG"):
        return "png"
    suffix = path.suffix.lower().lstrip(".")
    if suffix in ("pgm", "png"):
        return suffix
    raise UnsupportedFormat(f"{path}: not a PGM (P5) or PNG file")


def decode_pgm(data: bytes) -> np.ndarray:
    m = _PGM_HEADER.match(data)
    if m is None:
        raise ParseError("malformed PGM header")
    width, height, maxval = (int(g) for g in m.groups())
    if width < 1 or height < 1:
        raise ParseError("PGM has zero size")
    if maxval != 255:
        raise UnsupportedFormat(f"PGM maxval {maxval} (only 255 is supported)")
    payload = data[m.end() : m.end() + width * height]
    if len(payload) < width * height:
        raise ParseError(f"truncated PGM payload: {len(payload)} of {width * height} bytes")
    return np.frombuffer(payload, dtype=np.uint8).reshape(height, width).astype(np.float64)


def load_image(path, format=None) -> np.ndarray:
    """Read an 8-bit grayscale PGM (P5) or PNG into a float64 array.

    Pixel values are the stored bytes widened to float, without rescaling.
    """
    path = Path(path)
    data = path.read_bytes()
    fmt = (format or _guess_format(path, data[:8])).lower()
    if fmt == "pgm":
        return decode_pgm(data)
    if fmt != "png":
        raise UnsupportedFormat(f"unknown image format {format!r}")
    try:
        with PILImage.open(path) as im:
            if im.format != "PNG":
                raise UnsupportedFormat(f"{path}: not a PNG file")
            if im.mode != "L":
                raise UnsupportedFormat(f"{path}: PNG mode {im.mode}, expected 8-bit grayscale")
            arr = np.asarray(im, dtype=np.uint8)
    except (UnidentifiedImageError, OSError, SyntaxError) as exc:
        raise ParseError(f"{path}: {exc}") from exc
    return arr.astype(np.float64)


def _to_bytes(img) -> np.ndarray:
    return np.clip(np.rint(as_image(img)), 0, 255).astype(np.uint8)


def save_image(path, img, format=None):
    """Write ``img`` as 8-bit grayscale, rounding and clamping to [0, 255]."""
    path = Path(path)
    fmt = (format or path.suffix.lstrip(".") or "png").lower()
    data = _to_bytes(img)
    if fmt == "pgm":
        h, w = data.shape
        path.write_bytes(b"P5\n%d %d\n255\n" % (w, h) + data.tobytes())
    elif fmt == "png":
        PILImage.fromarray(data, mode="L").save(path, format="PNG")
    else:
        raise UnsupportedFormat(f"cannot write format {fmt!r}")


def resample_bilinear(img, height, width) -> np.ndarray:
    """Resize with a bilinear filter (used to bring flow frames to 160x120)."""
    im = PILImage.fromarray(as_image(img).astype(np.float32), mode="F")
    return np.asarray(im.resize((width, height), PILImage.BILINEAR), dtype=np.float64)


def load_ground_truth(path, scale_divisor=8, unknown_value=0, sign=1) -> GroundTruth:
    stored = load_image(path)
    return GroundTruth.from_stored(stored, scale_divisor, unknown_value, sign)


def write_motion_csv(path, field: MotionField):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["granularity", "block", "wx", "wy", "height", "width"])
        w.writerow([field.granularity, field.block, *field.window, *field.image_shape])
        w.writerow(["row", "col", "mh", "mv"])
        g1, g2 = field.grid_shape
        for r in range(g1):
            for c in range(g2):
                w.writerow([r, c, int(field.mh[r, c]), int(field.mv[r, c])])


def read_motion_csv(path) -> MotionField:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    try:
        header = dict(zip(rows[0], rows[1]))
        block = int(header["block"])
        window = (int(header["wx"]), int(header["wy"]))
        if rows[2] != ["row", "col", "mh", "mv"]:
            raise ParseError(f"{path}: missing record header")
        recs = np.array([[int(v) for v in r] for r in rows[3:] if r], dtype=np.int64)
    except (IndexError, KeyError, ValueError) as exc:
        raise ParseError(f"{path}: bad motion CSV ({exc})") from exc
    if "height" in header:
        shape = (int(header["height"]), int(header["width"]))
    else:
        # without pixel dims assume full blocks
        shape = ((recs[:, 0].max() + 1) * block, (recs[:, 1].max() + 1) * block)
    grid = (recs[:, 0].max() + 1, recs[:, 1].max() + 1)
    mh = np.zeros(grid, dtype=np.int64)
    mv = np.zeros(grid, dtype=np.int64)
    mh[recs[:, 0], recs[:, 1]] = recs[:, 2]
    mv[recs[:, 0], recs[:, 1]] = recs[:, 3]
    return MotionField(mh, mv, shape, window, block)
