"""Named experiment suites with restartable CSV output.

Each suite maps one (rate, seed) grid point to rows for several schemes.
Rows are keyed by (dataset, rate, seed, scheme); a rerun skips every grid
point whose rows are already in the suite's CSV.  Each row also carries the
resolved configuration columns so it can be reproduced on its own.
"""

from __future__ import annotations

import csv
import logging
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass
from pathlib import Path

from .config import ExperimentConfig, dataset_config, from_dict
from .datasets import load_pair
from .pipeline import run_dfr, run_estimate, run_reconstruction
from .plotting import rate_curves

log = logging.getLogger(__name__)

KEY = ("dataset", "rate", "seed", "scheme")


def _fig2(cfg, pair, rate, seed):
    return {"compressed": run_estimate(cfg, pair, rate, seed)["row"]}


def _fig4(cfg, pair, rate, seed):
    # "tuned" is the best prediction over the configured grid at this rate
    best = None
    for lam in cfg.energy.lam_grid or (cfg.energy.lam,):
        row = {**run_estimate(cfg, pair, rate, seed, lam=float(lam))["row"], "lam_used": float(lam)}
        if best is None or row["psnr_i2"] > best["psnr_i2"]:
            best = row
    return {"lambda-0": {**run_estimate(cfg, pair, rate, seed, lam=0.0)["row"], "lam_used": 0.0},
            "lambda-tuned": best}


def _fig5(cfg, pair, rate, seed):
    return {
        "distinct": run_estimate(cfg, pair, rate, seed, same_matrix=False)["row"],
        "same": run_estimate(cfg, pair, rate, seed, same_matrix=True)["row"],
        "dfr-sparsity": run_dfr(cfg, pair, rate, seed)["row"],
    }


def _fig7(cfg, pair, rate, seed):
    bits = sorted({int(b) for b in cfg.quantize_bits} | {0})
    if bits == [0]:
        bits = [0, 2, 3, 4]
    return {("unquantized" if b == 0 else f"q{b}"): run_estimate(cfg, pair, rate, seed, bits=b)["row"]
            for b in bits}


def _fig9(cfg, pair, rate, seed):
    return run_reconstruction(cfg, pair, rate, seed)["rows"]


@dataclass(frozen=True)
class Suite:
    name: str
    dataset: str
    runner: object
    metrics: tuple
    schemes: tuple
    title: str


SUITES = {
    s.name: s
    for s in (
        Suite("fig2_venus", "venus", _fig2, ("error_rate", "mse_i2", "mse_i1"), ("compressed",),
              "dense disparity from measurements"),
        Suite("fig4_regularization", "tsukuba", _fig4, ("psnr_i2", "error_rate"),
              ("lambda-0", "lambda-tuned"), "effect of the smoothness term"),
        Suite("fig5_tsukuba_dfr", "tsukuba", _fig5, ("psnr_i2", "error_rate"),
              ("distinct", "same", "dfr-sparsity"), "compressed estimation vs reconstruct-then-estimate"),
        Suite("fig7_quantization", "venus", _fig7, ("psnr_i2",), None, "quantized measurements"),
        Suite("fig9_joint", "tsukuba", _fig9, ("psnr_mean", "psnr_I1", "psnr_I2"),
              ("independent", "joint-estimated-A", "joint-groundtruth-A"), "joint reconstruction"),
    )
}


def _key(row):
    return (str(row["dataset"]), f"{float(row['rate']):g}", str(int(float(row["seed"]))), str(row["scheme"]))


def read_rows(path) -> list:
    path = Path(path)
    if not path.is_file():
        return []
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def _expected_schemes(suite: Suite, cfg: ExperimentConfig):
    if suite.schemes is not None:
        return set(suite.schemes)
    bits = sorted({int(b) for b in cfg.quantize_bits} | {0})
    if bits == [0]:
        bits = [0, 2, 3, 4]
    return {"unquantized" if b == 0 else f"q{b}" for b in bits}


def _job(suite_name, cfg_dict, rate, seed):
    cfg = from_dict(cfg_dict)
    suite = SUITES[suite_name]
    pair = load_pair(cfg.dataset)
    rows = suite.runner(cfg, pair, rate, seed)
    base = {"dataset": cfg.dataset.name, "rate": rate, "seed": seed}
    return [{**base, "scheme": scheme, **metrics, **cfg.summary()} for scheme, metrics in rows.items()]


class _Writer:
    """Appends rows to a CSV, keeping the header of an existing file."""

    def __init__(self, path):
        self.path = Path(path)
        self.fields = None
        if self.path.is_file():
            with open(self.path, newline="", encoding="utf-8") as fh:
                self.fields = next(csv.reader(fh), None)

    def write(self, rows):
        if not rows:
            return
        new = self.fields is None
        if new:
            self.fields = list(rows[0].keys())
            for r in rows[1:]:
                self.fields += [k for k in r if k not in self.fields]
        with open(self.path, "a", newline="", encoding="utf-8") as fh:
            w = csv.DictWriter(fh, fieldnames=self.fields, extrasaction="ignore")
            if new:
                w.writeheader()
            w.writerows(rows)


def run_suite(name, cfg: ExperimentConfig, out_dir=None, dataset=None, plot=True) -> dict:
    """Run (or resume) a suite; returns paths of the CSV and the figure."""
    if name not in SUITES:
        raise KeyError(f"unknown suite {name!r}; suites: {sorted(SUITES)}")
    suite = SUITES[name]
    if dataset is not None:
        cfg.dataset = dataset_config(dataset) if isinstance(dataset, (str, dict)) else dataset
    out = Path(out_dir or cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / f"{name}.csv"
    # fail early with a clear message when inputs are missing
    load_pair(cfg.dataset)

    done = {_key(r) for r in read_rows(csv_path)}
    expected = _expected_schemes(suite, cfg)
    todo = []
    for rate in cfg.rates:
        for seed in cfg.seeds:
            keys = {_key({"dataset": cfg.dataset.name, "rate": rate, "seed": seed, "scheme": s}) for s in expected}
            if keys <= done:
                continue
            todo.append((float(rate), int(seed)))
    log.info("%s: %d grid points to run, %d keys already present", name, len(todo), len(done))

    writer = _Writer(csv_path)
    cfg_dict = cfg.to_dict()
    if cfg.workers > 1 and len(todo) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            futs = [pool.submit(_job, name, cfg_dict, r, s) for r, s in todo]
            for fut in as_completed(futs):
                writer.write([row for row in fut.result() if _key(row) not in done])
    else:
        for r, s in todo:
            writer.write([row for row in _job(name, cfg_dict, r, s) if _key(row) not in done])
            log.info("%s: rate %g seed %d done", name, r, s)

    result = {"csv": csv_path, "ran": len(todo)}
    if plot:
        result["figure"] = rate_curves(read_rows(csv_path), suite.metrics, out / f"{name}.png", suite.title)
    return result
