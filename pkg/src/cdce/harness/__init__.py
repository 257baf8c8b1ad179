"""Configuration, datasets, experiment suites and the command line."""

from .bench import SUITES, run_suite
from .config import ExperimentConfig, dump_defaults, from_dict, load_config
from .datasets import DatasetMissing, available, load_pair

__all__ = ["SUITES", "DatasetMissing", "ExperimentConfig", "available", "dump_defaults", "from_dict",
           "load_config", "load_pair", "run_suite"]
