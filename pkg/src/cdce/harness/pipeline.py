"""Experiment steps shared by the CLI subcommands and the bench suites."""

from __future__ import annotations

import time
from dataclasses import dataclass, replace

import numpy as np

from ..core import ImagePair, MotionField, disparity_error_rate, mse, psnr
from ..energy import CompressedData
from ..optimizer import LabelSpace, image_domain_optimize, optimize
from ..reconstruct import independent_reconstruct, joint_reconstruct, report_row
from ..sensing import MeasurementSet, SensingMatrix, build_sensing, measure, quantize, rate_to_m
from ..warp import build_warp
from .config import ExperimentConfig


@dataclass
class Sensed:
    S1: SensingMatrix
    S2: SensingMatrix
    Y1: MeasurementSet
    Y2: MeasurementSet
    rate: float
    seed: int

    def data(self) -> CompressedData:
        return CompressedData(self.Y1, self.Y2, self.S1, self.S2)


def sensing_pair(shape, rate, seed, kind, same_matrix=False):
    """Sensing operators for both views; view ``i`` uses seed ``2*seed + i - 1``."""
    n1, n2 = shape
    m = rate_to_m(rate, n2)
    S1 = build_sensing(kind, m, n1, n2, 2 * int(seed))
    S2 = S1 if same_matrix else build_sensing(kind, m, n1, n2, 2 * int(seed) + 1)
    return S1, S2


def sense(pair: ImagePair, rate, seed, cfg: ExperimentConfig, bits=0, same_matrix=None) -> Sensed:
    same = cfg.same_matrix if same_matrix is None else same_matrix
    S1, S2 = sensing_pair(pair.shape, rate, seed, cfg.matrix, same)
    Y1, Y2 = measure(pair.image1, S1), measure(pair.image2, S2)
    if bits:
        Y1, Y2 = quantize(Y1, bits), quantize(Y2, bits)
    return Sensed(S1, S2, Y1, Y2, float(rate), int(seed))


def label_space(cfg: ExperimentConfig, stereo=True) -> LabelSpace:
    wx, wy = cfg.energy.window
    if stereo:
        return LabelSpace.stereo(wx, signed=cfg.energy.signed)
    return LabelSpace.flow(wx, wy)


def estimate(cfg: ExperimentConfig, sensed: Sensed, stereo=True, lam=None):
    params = cfg.energy.params(sensed.rate, lam)
    return optimize(sensed.Y1, sensed.Y2, sensed.S1, sensed.S2, params, label_space(cfg, stereo),
                    mode=cfg.optimizer.mode, max_sweeps=cfg.optimizer.max_sweeps, data=sensed.data())


def estimate_image_domain(cfg: ExperimentConfig, img1, img2, stereo=True, rate=1.0, lam=None):
    params = cfg.energy.params(rate, lam)
    return image_domain_optimize(img1, img2, params, label_space(cfg, stereo),
                                 mode=cfg.optimizer.mode, max_sweeps=cfg.optimizer.max_sweeps)


def prediction_metrics(pair: ImagePair, field: MotionField) -> dict:
    """Quality of the prediction ``I2_hat = A I1`` of the reference view."""
    pred = build_warp(field).predict(pair.image1)
    out = {"mse_i2": mse(pred, pair.image2), "mse_i1": mse(pred, pair.image1),
           "psnr_i2": psnr(pred, pair.image2)}
    if pair.ground_truth is not None:
        out["error_rate"] = disparity_error_rate(field, pair.ground_truth, stereo=pair.stereo)
    return out


def groundtruth_field(cfg: ExperimentConfig, pair: ImagePair) -> MotionField:
    return pair.ground_truth.to_motion_field(cfg.energy.window)


def run_estimate(cfg, pair, rate, seed, bits=0, same_matrix=None, lam=None) -> dict:
    t0 = time.perf_counter()
    sensed = sense(pair, rate, seed, cfg, bits, same_matrix)
    field, trace = estimate(cfg, sensed, pair.stereo, lam)
    row = prediction_metrics(pair, field)
    row.update(energy=trace.final_energy, wall_ms=1e3 * (time.perf_counter() - t0))
    return {"row": row, "field": field, "trace": trace, "sensed": sensed}


def run_dfr(cfg, pair, rate, seed) -> dict:
    """Reconstruct both views independently, then estimate in the image domain."""
    t0 = time.perf_counter()
    sensed = sense(pair, rate, seed, cfg)
    P = cfg.recon_params()
    r1 = independent_reconstruct(sensed.Y1, sensed.S1, P)
    r2 = independent_reconstruct(sensed.Y2, sensed.S2, P)
    i1, i2 = np.clip(r1.images[0], 0, 255), np.clip(r2.images[0], 0, 255)
    field, trace = estimate_image_domain(cfg, i1, i2, pair.stereo, rate)
    row = prediction_metrics(pair, field)
    row.update(energy=trace.final_energy, wall_ms=1e3 * (time.perf_counter() - t0))
    return {"row": row, "field": field, "trace": trace, "sensed": sensed}


def run_reconstruction(cfg, pair, rate, seed, schemes=("independent", "joint-estimated-A", "joint-groundtruth-A"),
                       estimated: MotionField = None) -> dict:
    """Report rows (and images) for each reconstruction scheme."""
    sensed = sense(pair, rate, seed, cfg)
    P = cfg.recon_params()
    rows, images = {}, {}
    for scheme in schemes:
        if scheme == "independent":
            res = joint_reconstruct(sensed.Y1, sensed.Y2, sensed.S1, sensed.S2,
                                    build_warp(MotionField.zeros(pair.shape)), replace(P, eps=float("inf")))
        elif scheme == "joint-estimated-A":
            if estimated is None:
                estimated, _ = estimate(cfg, sensed, pair.stereo)
            res = joint_reconstruct(sensed.Y1, sensed.Y2, sensed.S1, sensed.S2, build_warp(estimated), P)
        elif scheme == "joint-groundtruth-A":
            if pair.ground_truth is None:
                continue
            A = build_warp(groundtruth_field(cfg, pair))
            res = joint_reconstruct(sensed.Y1, sensed.Y2, sensed.S1, sensed.S2, A, P)
        else:
            raise ValueError(f"unknown reconstruction scheme {scheme!r}")
        row = report_row(rate, scheme, res, pair.image1, pair.image2)
        row.update(converged=res.converged, meas_violation=res.final_violation.get("measurement"),
                   corr_excess=res.final_violation.get("correlation", 0.0))
        rows[scheme] = row
        images[scheme] = res.clamped()
    return {"rows": rows, "images": images, "estimated": estimated, "sensed": sensed}
