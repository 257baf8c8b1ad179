"""Data, smoothness and total energies of a motion field, plus bound diagnostics.

The compressed-domain data cost of a field is

    E_d = sum_k || Y2_k - phi2_k A^k Phi1^T Y1 ||^2

and its image-domain counterpart is ``sum_k || I2_k - A^k I1 ||^2``.  The
pre-image ``Phi1^T Y1`` does not depend on the field, so it is computed once
per :class:`CompressedData` and reused by every evaluation.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .core import MotionField, as_image
from .errors import ConfigError, ShapeError
from .sensing import MeasurementSet, SensingMatrix, check_provenance, measure
from .warp import build_warp

BOUND_COLUMNS = ("rate", "data_image", "data_compressed", "alpha", "eta", "delta_emp",
                 "c_lower", "c_upper", "sandwich_holds")


@dataclass(frozen=True)
class EnergyParams:
    lam: float = 0.0
    tau: float = 2.0
    window: tuple = (16, 0)
    block: int = 1

    def __post_init__(self):
        if self.lam < 0:
            raise ConfigError("smoothness weight must be >= 0")
        if self.tau < 1:
            raise ConfigError("truncation level must be >= 1")
        if self.block < 1:
            raise ConfigError("block size must be >= 1")
        object.__setattr__(self, "window", tuple(int(w) for w in self.window))

    @property
    def granularity(self):
        return "pixel" if self.block == 1 else "block"


def pairwise(d_h, d_v, tau):
    """Truncated L1 penalty between two motion vectors given their differences."""
    return np.minimum(np.abs(d_h) + np.abs(d_v), tau)


def smoothness_cost(field: MotionField, params: EnergyParams) -> float:
    """Truncated-linear penalty summed over 4-connected cell pairs."""
    mh, mv = field.mh, field.mv
    total = pairwise(np.diff(mh, axis=1), np.diff(mv, axis=1), params.tau).sum()
    total += pairwise(np.diff(mh, axis=0), np.diff(mv, axis=0), params.tau).sum()
    return float(total)


def _check_images(field, i1, i2):
    if i1.shape != i2.shape or i1.shape != field.image_shape:
        raise ShapeError(f"images {i1.shape}/{i2.shape} vs field {field.image_shape}")


def data_cost_image(field: MotionField, img1, img2) -> float:
    i1, i2 = as_image(img1), as_image(img2)
    _check_images(field, i1, i2)
    return float(np.sum((i2 - build_warp(field).predict(i1)) ** 2))


class CompressedData:
    """Measurements of both views with the cached pre-image of the first.

    Construct once per (Y1, S1, Y2, S2) and pass to every evaluation.
    """

    def __init__(self, Y1: MeasurementSet, Y2: MeasurementSet, S1: SensingMatrix, S2: SensingMatrix):
        check_provenance(Y1, S1)
        check_provenance(Y2, S2)
        if S1.shape != S2.shape:
            raise ConfigError(f"sensing dims differ: {S1.shape} vs {S2.shape}")
        self.Y1, self.Y2, self.S1, self.S2 = Y1, Y2, S1, S2
        pre = S1.adjoint(Y1.y)
        pre.setflags(write=False)
        self.pre1 = pre

    @property
    def shape(self):
        return self.S1.shape

    def predicted_rows(self, field: MotionField) -> np.ndarray:
        """``A^k Phi1^T Y1`` for every row (an image-domain prediction)."""
        if field.image_shape != self.shape:
            raise ShapeError(f"field {field.image_shape} vs measurements {self.shape}")
        return build_warp(field).predict(self.pre1)

    def residual(self, field: MotionField) -> np.ndarray:
        return self.Y2.y - self.S2.apply(self.predicted_rows(field))

    def data_cost(self, field: MotionField) -> float:
        return float(np.sum(self.residual(field) ** 2))


def data_cost_compressed(field, Y1, Y2, S1, S2, data: CompressedData = None) -> float:
    if data is None:
        data = CompressedData(Y1, Y2, S1, S2)
    return data.data_cost(field)


def total_energy(field, Y1, Y2, S1, S2, params: EnergyParams, data: CompressedData = None) -> float:
    e = data_cost_compressed(field, Y1, Y2, S1, S2, data)
    if params.lam:
        e += params.lam * smoothness_cost(field, params)
    return e


def total_energy_image(field, img1, img2, params: EnergyParams) -> float:
    e = data_cost_image(field, img1, img2)
    if params.lam:
        e += params.lam * smoothness_cost(field, params)
    return e


@dataclass(frozen=True)
class BoundReport:
    """Compressed-domain penalty diagnostics for one field and sensing pair.

    ``delta_emp`` is the per-instance distortion observed on the row
    residuals, substituted for the unknown embedding constant.
    ``sandwich_holds`` evaluates the two-sided bound exactly as stated (with
    the absolute value on the lower side); ``signed_lower_holds`` checks the
    weaker ``(1-d)^2 E~ - C_l <= E_d`` that the row-wise argument supports.
    """

    rate: float
    data_image: float
    data_compressed: float
    alpha: float
    eta: float
    delta_emp: float
    c_lower: float
    c_upper: float
    sandwich_holds: bool
    upper_holds: bool
    lower_holds: bool
    signed_lower_holds: bool
    row_sigma_max: np.ndarray = None
    row_eta: np.ndarray = None

    @property
    def lower_bound(self):
        return abs((1 - self.delta_emp) ** 2 * self.data_image - self.c_lower)

    @property
    def upper_bound(self):
        return (1 + self.delta_emp) ** 2 * self.data_image + self.c_upper

    def row(self) -> dict:
        return {k: getattr(self, k) for k in BOUND_COLUMNS}


def bound_report(field: MotionField, img1, img2, S1: SensingMatrix, S2: SensingMatrix,
                 Y1: MeasurementSet = None, Y2: MeasurementSet = None, rtol=1e-9) -> BoundReport:
    """Evaluate both data costs and the penalty bound terms for ``field``."""
    i1, i2 = as_image(img1), as_image(img2)
    _check_images(field, i1, i2)
    if S1.shape != i1.shape or S2.shape != i1.shape:
        raise ShapeError("sensing dims do not match the images")
    Y1 = measure(i1, S1) if Y1 is None else Y1
    Y2 = measure(i2, S2) if Y2 is None else Y2
    data = CompressedData(Y1, Y2, S1, S2)
    A = build_warp(field)

    resid = i2 - A.predict(i1)                        # image-domain row residuals
    row_norm = np.linalg.norm(resid, axis=1)
    data_image = float(np.sum(row_norm**2))
    alpha = float(row_norm.sum())
    data_comp = data.data_cost(field)

    proj_norm = np.linalg.norm(S2.apply(resid), axis=1)
    ok = row_norm > 1e-12
    delta = float(np.max(np.abs(proj_norm[ok] / row_norm[ok] - 1.0))) if ok.any() else 0.0

    n1 = i1.shape[0]
    wy = max(field.window[1], int(np.abs(field.mv).max()) if field.mv.size else 0)
    pre_err = np.linalg.norm(data.pre1 - i1, axis=1)
    csum = np.concatenate([[0.0], np.cumsum(pre_err)])
    lo = np.clip(np.arange(n1) - wy, 0, n1)
    hi = np.clip(np.arange(n1) + wy + 1, 0, n1)
    window_err = csum[hi] - csum[lo]
    sig = A.row_sigma_max()
    row_eta = sig * window_err
    eta = float(row_eta.sum())

    c_upper = eta**2 + 2 * (1 + delta) * eta * alpha
    c_lower = eta**2 + 2 * (1 - delta) * eta * alpha
    upper = (1 + delta) ** 2 * data_image + c_upper
    lower = abs((1 - delta) ** 2 * data_image - c_lower)
    slack = rtol * max(1.0, data_comp, upper)
    upper_holds = data_comp <= upper + slack
    lower_holds = lower <= data_comp + slack
    signed_lower = (1 - delta) ** 2 * data_image - c_lower <= data_comp + slack
    return BoundReport(
        rate=S1.rate, data_image=data_image, data_compressed=data_comp, alpha=alpha, eta=eta,
        delta_emp=delta, c_lower=c_lower, c_upper=c_upper,
        sandwich_holds=bool(upper_holds and lower_holds), upper_holds=bool(upper_holds),
        lower_holds=bool(lower_holds), signed_lower_holds=bool(signed_lower),
        row_sigma_max=sig, row_eta=row_eta,
    )


def write_bound_csv(path, reports, extra: dict = None):
    extra = extra or {}
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=[*extra.keys(), *BOUND_COLUMNS])
        w.writeheader()
        for rep in reports:
            w.writerow({**extra, **rep.row()})
