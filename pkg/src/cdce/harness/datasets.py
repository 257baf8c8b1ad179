"""Loading image pairs named by a :class:`DatasetConfig`."""

from __future__ import annotations

import hashlib
from pathlib import Path

import numpy as np
from PIL import Image as PILImage

from ..core import GroundTruth, ImagePair
from ..errors import CDCEError, ConfigError, UnsupportedFormat
from ..io import load_image
from ..synthetic import layered_stereo
from .config import DatasetConfig


class DatasetMissing(CDCEError, FileNotFoundError):
    """A dataset file is not on disk (datasets are installed by hand)."""


def sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _read_gray(path: Path, convert: bool) -> np.ndarray:
    try:
        return load_image(path)
    except UnsupportedFormat:
        if not convert:
            raise
    # colour originals (e.g. Middlebury .ppm): ITU-R 601 luma via Pillow
    with PILImage.open(path) as im:
        return np.asarray(im.convert("L"), dtype=np.float64)


def check_files(ds: DatasetConfig):
    """Raise :class:`DatasetMissing` unless every referenced file exists."""
    if ds.kind != "files":
        return
    paths = ds.paths()
    for key in ("image1", "image2"):
        if key not in paths:
            raise ConfigError(f"dataset {ds.name}: {key} not set")
    missing = [str(p) for p in paths.values() if not p.is_file()]
    if missing:
        raise DatasetMissing(f"dataset {ds.name}: missing {', '.join(missing)} "
                             f"(set dataset.root or ${'{'}CDCE_DATA_DIR{'}'})")


def available(ds: DatasetConfig) -> bool:
    try:
        check_files(ds)
    except DatasetMissing:
        return False
    return True


def load_pair(ds: DatasetConfig) -> ImagePair:
    if ds.kind == "synthetic":
        return layered_stereo(tuple(ds.shape), tuple(ds.disparities), seed=ds.scene_seed,
                              smooth=ds.smooth, noise=ds.noise)
    check_files(ds)
    paths = ds.paths()
    for key, digest in (ds.sha256 or {}).items():
        if key in paths and sha256(paths[key]) != digest.lower():
            raise ConfigError(f"dataset {ds.name}: checksum mismatch for {paths[key]}")
    i1 = _read_gray(paths["image1"], ds.grayscale)
    i2 = _read_gray(paths["image2"], ds.grayscale)
    gt = None
    if "ground_truth" in paths:
        stored = _read_gray(paths["ground_truth"], ds.grayscale)
        gt = GroundTruth.from_stored(stored, ds.scale_divisor, ds.unknown_value)
    return ImagePair(i1, i2, gt, name=ds.name, stereo=ds.stereo, meta={"paths": {k: str(v) for k, v in paths.items()}})
