"""Correlation (disparity and motion) estimation from row-wise compressed
image measurements, with bound diagnostics and joint reconstruction."""

from .core import GroundTruth, ImagePair, MotionField, disparity_error_rate, mse, psnr
from .energy import (BoundReport, CompressedData, EnergyParams, bound_report, data_cost_compressed,
                     data_cost_image, smoothness_cost, total_energy)
from .errors import CDCEError, ConfigError, NumericalError, ParseError, ShapeError, UnsupportedFormat
from .optimizer import LabelSpace, image_domain_optimize, optimize
from .reconstruct import (ReconParams, SparsityBasis, independent_reconstruct, joint_reconstruct,
                          project_correlation, project_measurements, soft_threshold)
from .sensing import (MeasurementSet, SensingMatrix, build_sensing, dequantize, measure, preimage,
                      quantize)
from .warp import WarpOperator, build_warp, compressed_predict, predict

__version__ = "0.1.0"

__all__ = [
    "BoundReport", "CDCEError", "CompressedData", "ConfigError", "EnergyParams", "GroundTruth",
    "ImagePair", "LabelSpace", "MeasurementSet", "MotionField", "NumericalError", "ParseError",
    "ReconParams", "SensingMatrix", "ShapeError", "SparsityBasis", "UnsupportedFormat", "WarpOperator",
    "bound_report", "build_sensing", "build_warp", "compressed_predict", "data_cost_compressed",
    "data_cost_image", "dequantize", "disparity_error_rate", "image_domain_optimize",
    "independent_reconstruct", "joint_reconstruct", "measure", "mse", "optimize", "preimage", "predict",
    "project_correlation", "project_measurements", "psnr", "quantize", "smoothness_cost", "soft_threshold",
    "total_energy",
]
