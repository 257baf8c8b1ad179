"""Discrete minimization of the motion energy (alpha-expansion, ICM, exhaustive)."""

from .expansion import (
    MODES,
    CompressedObjective,
    ImageObjective,
    OptimizerTrace,
    TraceRecord,
    image_domain_optimize,
    optimize,
)
from .graph import FlowGraph, max_flow
from .labels import LabelSpace

__all__ = [
    "MODES",
    "CompressedObjective",
    "FlowGraph",
    "ImageObjective",
    "LabelSpace",
    "OptimizerTrace",
    "TraceRecord",
    "image_domain_optimize",
    "max_flow",
    "optimize",
]
