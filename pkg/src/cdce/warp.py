"""Sparse warp operator relating the two views, in image and measurement space.

The operator is a 0/1 selection matrix with a single unit per row.  It is
stored only as a source-index map: output pixel ``(k, l)`` copies input pixel
``source_index[k, l]`` (flat, row-major).  A displacement ``(mh, mv)`` reads
``I1[k + mv, l + mh]``; coordinates leaving the image are clamped per axis.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import MotionField, as_image
from .errors import ConfigError, ShapeError
from .sensing import MeasurementSet, SensingMatrix, check_provenance

DENSE_LIMIT = 256


@dataclass(frozen=True, eq=False)
class WarpOperator:
    source_index: np.ndarray

    def __post_init__(self):
        src = np.asarray(self.source_index, dtype=np.int64)
        if src.ndim != 2:
            raise ShapeError("source_index must be a 2-D map")
        if src.size and (src.min() < 0 or src.max() >= src.size):
            raise ConfigError("source index out of range")
        src.setflags(write=False)
        object.__setattr__(self, "source_index", src)

    @property
    def shape(self):
        return self.source_index.shape

    @property
    def size(self):
        return self.source_index.size

    def predict(self, img) -> np.ndarray:
        img = np.asarray(img, dtype=np.float64)
        if img.shape != self.shape:
            raise ShapeError(f"image {img.shape} vs warp {self.shape}")
        return img.reshape(-1)[self.source_index]

    def adjoint(self, img) -> np.ndarray:
        """``A^T v``: scatter-add every output pixel back onto its source."""
        img = np.asarray(img, dtype=np.float64)
        if img.shape != self.shape:
            raise ShapeError(f"image {img.shape} vs warp {self.shape}")
        out = np.bincount(self.source_index.reshape(-1), weights=img.reshape(-1), minlength=self.size)
        return out.reshape(self.shape)

    def row_multiplicities(self) -> np.ndarray:
        """Largest number of outputs of image row ``k`` that share one source."""
        n1 = self.shape[0]
        out = np.empty(n1, dtype=np.int64)
        for k in range(n1):
            out[k] = np.unique(self.source_index[k], return_counts=True)[1].max()
        return out

    def row_sigma_max(self) -> np.ndarray:
        """Largest singular value of each row block ``A^k``."""
        return np.sqrt(self.row_multiplicities().astype(np.float64))

    @property
    def sigma_max(self) -> float:
        return float(np.sqrt(np.bincount(self.source_index.reshape(-1)).max()))

    def dense(self) -> np.ndarray:
        if self.size > DENSE_LIMIT:
            raise ConfigError(f"dense warp only for <= {DENSE_LIMIT} pixels")
        a = np.zeros((self.size, self.size))
        a[np.arange(self.size), self.source_index.reshape(-1)] = 1.0
        return a

    def row_block(self, k) -> np.ndarray:
        n1, n2 = self.shape
        if self.size > DENSE_LIMIT:
            raise ConfigError(f"dense warp only for <= {DENSE_LIMIT} pixels")
        a = np.zeros((n2, n1 * n2))
        a[np.arange(n2), self.source_index[k]] = 1.0
        return a


def source_index(mh, mv) -> np.ndarray:
    """Flat source indices for per-pixel displacement arrays."""
    mh = np.asarray(mh)
    mv = np.asarray(mv)
    n1, n2 = mh.shape
    rows = np.clip(np.arange(n1)[:, None] + mv, 0, n1 - 1)
    cols = np.clip(np.arange(n2)[None, :] + mh, 0, n2 - 1)
    return rows * n2 + cols


def build_warp(field: MotionField, dims=None) -> WarpOperator:
    if dims is not None and tuple(dims) != field.image_shape:
        raise ShapeError(f"field covers {field.image_shape}, requested {tuple(dims)}")
    mh, mv = field.to_pixels()
    return WarpOperator(source_index(mh, mv))


def predict(A: WarpOperator, img) -> np.ndarray:
    return A.predict(as_image(img))


def _check_pair(A: WarpOperator, S1: SensingMatrix, S2: SensingMatrix):
    if S1.shape != A.shape or S2.shape != A.shape:
        raise ConfigError(f"sensing dims {S1.shape}/{S2.shape} vs warp {A.shape}")


def compressed_predict(A: WarpOperator, Y1: MeasurementSet, S1: SensingMatrix, S2: SensingMatrix,
                       pre1=None) -> MeasurementSet:
    """Predict the second view's measurements, ``Phi2 A Phi1^T Y1``.

    ``pre1`` may carry an already computed pre-image of ``Y1``.
    """
    check_provenance(Y1, S1)
    _check_pair(A, S1, S2)
    if pre1 is None:
        pre1 = S1.adjoint(Y1.y)
    return MeasurementSet(S2.apply(A.predict(pre1)), S2.provenance)
