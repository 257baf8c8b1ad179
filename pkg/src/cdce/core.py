"""Image and motion-field containers plus the evaluation metrics.

Images are plain 2-D ``float64`` arrays (rows x columns, intensities nominally
in [0, 255]); :func:`as_image` is the single validation point.  Motion fields
hold integer displacements either per pixel or per square block.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ShapeError

PSNR_PEAK = 255.0


def as_image(a, *, copy=False) -> np.ndarray:
    """Validate ``a`` as a grayscale raster and return it as float64."""
    img = np.array(a, dtype=np.float64, copy=copy)
    if img.ndim != 2 or img.shape[0] < 1 or img.shape[1] < 1:
        raise ShapeError(f"expected a non-empty 2-D image, got shape {img.shape}")
    if not np.all(np.isfinite(img)):
        raise ValueError("image contains non-finite intensities")
    return img


def _same_shape(a, b):
    if a.shape != b.shape:
        raise ShapeError(f"shape mismatch: {a.shape} vs {b.shape}")


def mse(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    _same_shape(a, b)
    return float(np.mean((a - b) ** 2))


def psnr(a, b, peak=PSNR_PEAK) -> float:
    """Peak signal-to-noise ratio in dB; ``inf`` when the images are equal."""
    err = mse(a, b)
    if err == 0.0:
        return math.inf
    return 10.0 * math.log10(peak**2 / err)


@dataclass(frozen=True)
class MotionField:
    """Integer displacement field on a pixel or block grid.

    ``mh`` is the horizontal (column) displacement and ``mv`` the vertical
    (row) displacement of every cell.  With ``block > 1`` the cell grid is
    ``ceil(N1/b) x ceil(N2/b)`` and every pixel of a block shares its cell's
    vector.
    """

    mh: np.ndarray
    mv: np.ndarray
    image_shape: tuple
    window: tuple = (0, 0)
    block: int = 1

    def __post_init__(self):
        mh = np.asarray(self.mh)
        mv = np.asarray(self.mv)
        if np.issubdtype(mh.dtype, np.floating) and not np.all(mh == np.round(mh)):
            raise ConfigError("motion values must be integers")
        if np.issubdtype(mv.dtype, np.floating) and not np.all(mv == np.round(mv)):
            raise ConfigError("motion values must be integers")
        mh = mh.astype(np.int64)
        mv = mv.astype(np.int64)
        if self.block < 1:
            raise ConfigError("block size must be >= 1")
        shape = tuple(int(s) for s in self.image_shape)
        grid = cell_grid_shape(shape, self.block)
        if mh.shape != grid or mv.shape != grid:
            raise ShapeError(f"cell grid {mh.shape}/{mv.shape} does not match {grid}")
        wx, wy = (int(w) for w in self.window)
        if mh.size and (np.abs(mh).max() > wx or np.abs(mv).max() > wy):
            raise ConfigError(f"motion exceeds search window (wx={wx}, wy={wy})")
        mh.setflags(write=False)
        mv.setflags(write=False)
        object.__setattr__(self, "mh", mh)
        object.__setattr__(self, "mv", mv)
        object.__setattr__(self, "image_shape", shape)
        object.__setattr__(self, "window", (wx, wy))

    @property
    def granularity(self) -> str:
        return "pixel" if self.block == 1 else "block"

    @property
    def grid_shape(self) -> tuple:
        return self.mh.shape

    @classmethod
    def zeros(cls, image_shape, window=(0, 0), block=1) -> "MotionField":
        grid = cell_grid_shape(image_shape, block)
        z = np.zeros(grid, dtype=np.int64)
        return cls(z, z.copy(), image_shape, window, block)

    @classmethod
    def constant(cls, image_shape, mh, mv=0, window=None, block=1) -> "MotionField":
        grid = cell_grid_shape(image_shape, block)
        if window is None:
            window = (abs(mh), abs(mv))
        return cls(np.full(grid, mh), np.full(grid, mv), image_shape, window, block)

    def with_cells(self, mh, mv) -> "MotionField":
        return MotionField(mh, mv, self.image_shape, self.window, self.block)

    def to_pixels(self):
        """Per-pixel ``(mh, mv)`` arrays of shape ``image_shape``."""
        return upsample_cells(self.mh, self.image_shape, self.block), upsample_cells(
            self.mv, self.image_shape, self.block
        )

    def as_pixel_field(self) -> "MotionField":
        mh, mv = self.to_pixels()
        return MotionField(mh, mv, self.image_shape, self.window, 1)

    @classmethod
    def from_pixels(cls, mh, mv, window, block=1) -> "MotionField":
        """Build a field from per-pixel arrays, averaging (then rounding) per block."""
        mh = np.asarray(mh, dtype=np.float64)
        mv = np.asarray(mv, dtype=np.float64)
        shape = mh.shape
        return cls(
            np.rint(block_mean(mh, block)),
            np.rint(block_mean(mv, block)),
            shape,
            window,
            block,
        )


def cell_grid_shape(image_shape, block) -> tuple:
    n1, n2 = image_shape
    return (-(-int(n1) // block), -(-int(n2) // block))


def upsample_cells(cells, image_shape, block) -> np.ndarray:
    cells = np.asarray(cells)
    if block == 1:
        return cells.copy()
    n1, n2 = image_shape
    return np.repeat(np.repeat(cells, block, axis=0), block, axis=1)[:n1, :n2]


def block_mean(values, block) -> np.ndarray:
    """Mean of ``values`` over each (possibly partial) ``block x block`` tile."""
    values = np.asarray(values, dtype=np.float64)
    if block == 1:
        return values.copy()
    n1, n2 = values.shape
    g1, g2 = cell_grid_shape(values.shape, block)
    rows = np.arange(n1) // block
    cols = np.arange(n2) // block
    sums = np.zeros((g1, g2))
    counts = np.zeros((g1, g2))
    np.add.at(sums, (rows[:, None], cols[None, :]), values)
    np.add.at(counts, (rows[:, None], cols[None, :]), 1.0)
    return sums / counts


@dataclass(frozen=True)
class GroundTruth:
    """Reference displacement raster in pixel units.

    Values may be fractional (Middlebury stores disparities at sub-pixel
    precision); ``unknown`` marks pixels excluded from every metric.
    """

    mh: np.ndarray
    mv: np.ndarray = None
    unknown: np.ndarray = None
    scale_divisor: int = 1

    def __post_init__(self):
        mh = np.asarray(self.mh, dtype=np.float64)
        mv = np.zeros_like(mh) if self.mv is None else np.asarray(self.mv, dtype=np.float64)
        unknown = np.zeros(mh.shape, dtype=bool) if self.unknown is None else np.asarray(self.unknown, bool)
        if self.scale_divisor < 1:
            raise ConfigError("scale_divisor must be >= 1")
        if mv.shape != mh.shape or unknown.shape != mh.shape:
            raise ShapeError("ground-truth components have different shapes")
        object.__setattr__(self, "mh", mh)
        object.__setattr__(self, "mv", mv)
        object.__setattr__(self, "unknown", unknown)

    @property
    def shape(self):
        return self.mh.shape

    @classmethod
    def from_stored(cls, stored, scale_divisor=8, unknown_value=0, sign=1) -> "GroundTruth":
        """Decode a stored disparity raster (``value = disparity * scale``)."""
        stored = np.asarray(stored, dtype=np.float64)
        unknown = stored == unknown_value if unknown_value is not None else None
        return cls(sign * stored / scale_divisor, None, unknown, scale_divisor)

    def to_motion_field(self, window, block=1) -> MotionField:
        """Nearest-integer field, clipped to ``window``; unknown pixels get 0."""
        wx, wy = window
        mh = np.clip(np.where(self.unknown, 0.0, np.rint(self.mh)), -wx, wx)
        mv = np.clip(np.where(self.unknown, 0.0, np.rint(self.mv)), -wy, wy)
        return MotionField.from_pixels(mh, mv, window, block)


def disparity_error_rate(est: MotionField, gt: GroundTruth, stereo=True, threshold=1.0) -> float:
    """Fraction of known pixels whose displacement error exceeds ``threshold``.

    In stereo mode only the horizontal component is compared; otherwise a
    pixel is bad when either component is off by more than the threshold.
    """
    mh, mv = est.to_pixels()
    if mh.shape != gt.shape:
        raise ShapeError(f"estimate {mh.shape} vs ground truth {gt.shape}")
    bad = np.abs(mh - gt.mh) > threshold
    if not stereo:
        bad |= np.abs(mv - gt.mv) > threshold
    known = ~gt.unknown
    n = int(known.sum())
    if n == 0:
        return 0.0
    return float(np.count_nonzero(bad & known) / n)


@dataclass(frozen=True)
class ImagePair:
    """Two views plus optional ground truth, as handed to the experiments."""

    image1: np.ndarray
    image2: np.ndarray
    ground_truth: GroundTruth = None
    name: str = "pair"
    stereo: bool = True
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        i1 = as_image(self.image1)
        i2 = as_image(self.image2)
        _same_shape(i1, i2)
        if self.ground_truth is not None and self.ground_truth.shape != i1.shape:
            raise ShapeError("ground truth does not match the image size")
        object.__setattr__(self, "image1", i1)
        object.__setattr__(self, "image2", i2)

    @property
    def shape(self):
        return self.image1.shape
