"""Experiment configuration: schema, defaults, YAML loading.

A config file is a YAML mapping.  Every key is optional; missing keys take
the defaults printed by ``cdce defaults``.  ``dataset`` may be a preset name
(``venus``, ``tsukuba``, ``synthetic``) or a mapping that overrides a preset.
"""

from __future__ import annotations

import dataclasses
import math
import os
from dataclasses import dataclass, field, fields
from pathlib import Path

import yaml

from ..energy import EnergyParams
from ..errors import ConfigError
from ..optimizer import MODES
from ..reconstruct import ReconParams
from ..sensing import KINDS, SCRAMBLED

DATA_ENV = "CDCE_DATA_DIR"
LAM_SCALINGS = ("rate", "none")


@dataclass
class DatasetConfig:
    """Where an image pair comes from.

    ``kind: files`` reads ``image1``/``image2``/``ground_truth`` relative to
    ``root``; ``kind: synthetic`` renders a layered stereo scene instead.
    ``image2`` is the reference view that carries the ground truth.
    """

    name: str = "synthetic"
    kind: str = "synthetic"
    root: str = None
    image1: str = None
    image2: str = None
    ground_truth: str = None
    scale_divisor: int = 1
    unknown_value: float = 0
    stereo: bool = True
    grayscale: bool = True
    sha256: dict = field(default_factory=dict)
    # synthetic scene
    shape: tuple = (96, 128)
    disparities: tuple = (2, 6, 10, 14)
    scene_seed: int = 1
    smooth: float = 1.5
    noise: float = 0.0

    def resolved_root(self) -> Path:
        if self.root:
            return Path(os.path.expanduser(self.root))
        return Path(os.environ.get(DATA_ENV, "data"))

    def paths(self) -> dict:
        root = self.resolved_root()
        out = {}
        for key in ("image1", "image2", "ground_truth"):
            v = getattr(self, key)
            if v:
                p = Path(v)
                out[key] = p if p.is_absolute() else root / p
        return out


PRESETS = {
    # right view is the reference: I2(k, l) = I1(k, l + d)
    "venus": dict(name="venus", kind="files", image1="venus/im2.ppm", image2="venus/im6.ppm",
                  ground_truth="venus/disp6.pgm", scale_divisor=8, unknown_value=0),
    "tsukuba": dict(name="tsukuba", kind="files", image1="tsukuba/scene1.row3.col2.ppm",
                    image2="tsukuba/scene1.row3.col3.ppm", ground_truth="tsukuba/truedisp.row3.col3.pgm",
                    scale_divisor=16, unknown_value=0),
    "synthetic": dict(name="synthetic", kind="synthetic"),
}

# smoothness weights per dataset (before rate scaling) and search windows
PRESET_ENERGY = {
    "venus": dict(lam=1e4, window=(20, 0)),
    "tsukuba": dict(lam=1e4, window=(16, 0)),
    "synthetic": dict(lam=1e4, window=(16, 0)),
}


@dataclass
class EnergyConfig:
    """Smoothness prior and motion search settings.

    With ``lam_scaling: rate`` the effective weight is ``lam * rate`` (the
    data term of unscaled orthonormal rows grows roughly in proportion to the
    rate).  ``lam_grid`` lists candidate weights for suites that tune the
    weight per rate; empty means ``lam`` only.  ``mode: block`` uses
    ``block x block`` cells.
    """

    lam: float = 1e4
    lam_scaling: str = "none"
    lam_grid: tuple = ()
    tau: float = 2.0
    window: tuple = (16, 0)
    mode: str = "pixel"
    block: int = 4
    signed: bool = False

    def params(self, rate: float, lam=None) -> EnergyParams:
        lam = self.lam if lam is None else lam
        if self.lam_scaling == "rate":
            lam = lam * rate
        return EnergyParams(lam=lam, tau=self.tau, window=tuple(self.window),
                            block=self.block if self.mode == "block" else 1)


@dataclass
class OptimizerConfig:
    mode: str = "alpha-expansion"
    max_sweeps: int = 5


@dataclass
class ExperimentConfig:
    name: str = "experiment"
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    rates: tuple = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)
    seeds: tuple = (0,)
    matrix: str = SCRAMBLED
    same_matrix: bool = False
    energy: EnergyConfig = field(default_factory=EnergyConfig)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    quantize_bits: tuple = (0,)
    recon: dict = field(default_factory=dict)
    out: str = "results"
    workers: int = 1

    def __post_init__(self):
        self.validate()

    def validate(self):
        if not self.rates:
            raise ConfigError("rates must be non-empty")
        for r in self.rates:
            if not 0.0 < float(r) <= 1.0:
                raise ConfigError(f"rate {r} outside (0, 1]")
        if not self.seeds:
            raise ConfigError("seeds must be non-empty")
        if any(int(s) < 0 for s in self.seeds):
            raise ConfigError("seeds must be >= 0")
        if self.matrix not in KINDS:
            raise ConfigError(f"matrix must be one of {KINDS}")
        for b in self.quantize_bits:
            if int(b) != 0 and not 2 <= int(b) <= 16:
                raise ConfigError(f"quantize bits {b}: use 0 (off) or 2..16")
        if self.energy.mode not in ("pixel", "block"):
            raise ConfigError("energy.mode must be pixel or block")
        if self.energy.lam_scaling not in LAM_SCALINGS:
            raise ConfigError(f"energy.lam_scaling must be one of {LAM_SCALINGS}")
        if self.optimizer.mode not in MODES:
            raise ConfigError(f"optimizer.mode must be one of {MODES}")
        if self.dataset.kind not in ("files", "synthetic"):
            raise ConfigError("dataset.kind must be files or synthetic")
        if int(self.workers) < 1:
            raise ConfigError("workers must be >= 1")
        self.energy.params(1.0)
        self.recon_params()

    def recon_params(self) -> ReconParams:
        try:
            kw = dict(self.recon)
            if "eps" in kw and isinstance(kw["eps"], str):
                kw["eps"] = float(kw["eps"])
            return ReconParams(**kw)
        except TypeError as exc:
            raise ConfigError(f"recon: {exc}") from None

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["recon"] = {f.name: getattr(self.recon_params(), f.name) for f in fields(ReconParams)}
        return _plain(d)

    def summary(self) -> dict:
        """Flat key columns embedded in every CSV row."""
        e = self.energy
        return {"matrix": self.matrix, "same_matrix": self.same_matrix, "lam": e.lam,
                "lam_scaling": e.lam_scaling, "tau": e.tau, "wx": e.window[0], "wy": e.window[1],
                "mode": e.mode, "block": e.block if e.mode == "block" else 1,
                "optimizer": self.optimizer.mode, "max_sweeps": self.optimizer.max_sweeps}


def _plain(x):
    if isinstance(x, dict):
        return {k: _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, float) and math.isinf(x):
        return "inf"
    return x


def _build(cls, data, where):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected a mapping")
    names = {f.name for f in fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
    kw = {}
    for k, v in data.items():
        kw[k] = tuple(v) if isinstance(v, list) else v
    return cls(**kw)


def dataset_config(spec) -> DatasetConfig:
    if spec is None:
        spec = "synthetic"
    if isinstance(spec, str):
        if spec not in PRESETS:
            raise ConfigError(f"unknown dataset preset {spec!r}; presets: {sorted(PRESETS)}")
        return DatasetConfig(**PRESETS[spec])
    if not isinstance(spec, dict):
        raise ConfigError("dataset: expected a preset name or a mapping")
    base = dict(PRESETS.get(spec.get("preset", ""), {}))
    spec = {k: v for k, v in spec.items() if k != "preset"}
    return _build(DatasetConfig, {**base, **spec}, "dataset")


def from_dict(data: dict) -> ExperimentConfig:
    data = dict(data or {})
    names = {f.name for f in fields(ExperimentConfig)}
    unknown = set(data) - names
    if unknown:
        raise ConfigError(f"unknown top-level keys {sorted(unknown)}")
    ds = dataset_config(data.pop("dataset", None))
    energy = dict(PRESET_ENERGY.get(ds.name, {}))
    energy.update(data.pop("energy", None) or {})
    kw = {k: tuple(v) if isinstance(v, list) else v for k, v in data.items()}
    return ExperimentConfig(
        dataset=ds,
        energy=_build(EnergyConfig, energy, "energy"),
        optimizer=_build(OptimizerConfig, kw.pop("optimizer", None), "optimizer"),
        **kw,
    )


def load_raw(path) -> dict:
    """Parse a YAML config file into a plain mapping (no validation)."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"config file not found: {path}")
    with open(path, encoding="utf-8") as fh:
        try:
            data = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: {exc}") from None
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return data


def load_config(path=None) -> ExperimentConfig:
    return from_dict(load_raw(path) if path is not None else {})


def dump_defaults() -> str:
    return yaml.safe_dump(from_dict({}).to_dict(), sort_keys=False)
