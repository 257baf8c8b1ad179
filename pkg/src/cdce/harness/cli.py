"""Command line entry point (``cdce`` / ``python -m cdce``).

Exit codes: 0 success, 2 missing or invalid inputs, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

from ..energy import bound_report, write_bound_csv
from ..errors import CDCEError, ConfigError, NumericalError, ParseError, UnsupportedFormat
from ..io import save_image, write_motion_csv
from ..reconstruct import write_report_csv
from ..sensing import write_measurements
from ..warp import build_warp
from .bench import SUITES, run_suite
from .config import dump_defaults, from_dict, load_raw
from .datasets import DatasetMissing, load_pair
from .pipeline import (estimate_image_domain, groundtruth_field, run_estimate, run_reconstruction,
                       sense)
from .plotting import field_image

log = logging.getLogger("cdce")

EXIT_INPUT = 2
EXIT_NUMERICAL = 3


def _common(p):
    p.add_argument("-v", "--verbose", action="store_true", help="log progress")
    p.add_argument("--config", metavar="PATH", help="YAML experiment config")
    p.add_argument("--dataset", help="dataset preset name (venus, tsukuba, synthetic)")
    p.add_argument("--rate", type=float, metavar="R", help="measurement rate in (0, 1]")
    p.add_argument("--seed", type=int, metavar="S", help="sensing seed")
    p.add_argument("--out", metavar="DIR", help="output directory")
    p.add_argument("--same-matrix", action="store_true", help="use one sensing matrix for both views")
    p.add_argument("--quantize-bits", type=int, metavar="B", help="quantize measurements to B bits (0 = off)")
    p.add_argument("--mode", choices=("pixel", "block"), help="motion granularity")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cdce", description="Correlation estimation from compressed images.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, help_ in (
        ("sense", "measure both views and write measurement files"),
        ("estimate", "estimate the motion field from measurements"),
        ("predict", "estimate, then write the predicted second view and its metrics"),
        ("bounds", "penalty bound diagnostics over the configured rates and seeds"),
        ("reconstruct", "independent and joint reconstruction of both views"),
        ("bench", "run a named experiment suite"),
    ):
        p = sub.add_parser(name, help=help_)
        _common(p)
        if name == "bench":
            p.add_argument("--suite", required=True, choices=sorted(SUITES))
            p.add_argument("--no-plot", action="store_true", help="skip the PNG figure")
    sub.add_parser("defaults", help="print the default configuration as YAML")
    return ap


def resolve_config(args, suite_dataset=None):
    raw = load_raw(args.config) if args.config else {}
    if args.dataset:
        raw["dataset"] = args.dataset
    elif "dataset" not in raw and suite_dataset:
        raw["dataset"] = suite_dataset
    if args.rate is not None:
        raw["rates"] = [args.rate]
    if args.seed is not None:
        raw["seeds"] = [args.seed]
    if args.out:
        raw["out"] = args.out
    if args.same_matrix:
        raw["same_matrix"] = True
    if args.quantize_bits is not None:
        raw["quantize_bits"] = [args.quantize_bits]
    if args.mode:
        raw["energy"] = {**(raw.get("energy") or {}), "mode": args.mode}
    return from_dict(raw)


def _write_row(path, row):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=list(row))
        w.writeheader()
        w.writerow(row)


def _print_row(row):
    print(",".join(row))
    print(",".join(f"{v:.6g}" if isinstance(v, float) else str(v) for v in row.values()))


def cmd_sense(cfg, out):
    pair = load_pair(cfg.dataset)
    rate, seed = cfg.rates[0], cfg.seeds[0]
    bits = int(cfg.quantize_bits[0])
    s = sense(pair, rate, seed, cfg, bits)
    write_measurements(out / "view1.cdce", s.Y1)
    write_measurements(out / "view2.cdce", s.Y2)
    _print_row({"dataset": cfg.dataset.name, "rate": rate, "seed": seed, "m": s.S1.m,
                "measurements": len(s.Y1) + len(s.Y2), "bits": bits, **cfg.summary()})


def _estimate(cfg, out, write_prediction):
    pair = load_pair(cfg.dataset)
    rate, seed = cfg.rates[0], cfg.seeds[0]
    res = run_estimate(cfg, pair, rate, seed, bits=int(cfg.quantize_bits[0]))
    field, trace = res["field"], res["trace"]
    write_motion_csv(out / "field.csv", field)
    trace.write_csv(out / "trace.csv")
    field_image(field, out / "field.png", f"{cfg.dataset.name}, rate {rate:g}")
    row = {"dataset": cfg.dataset.name, "rate": rate, "seed": seed, **res["row"], **cfg.summary()}
    if write_prediction:
        save_image(out / "prediction.pgm", build_warp(field).predict(pair.image1))
        _write_row(out / "predict.csv", row)
    else:
        _write_row(out / "estimate.csv", row)
    _print_row(row)


def cmd_bounds(cfg, out):
    pair = load_pair(cfg.dataset)
    if pair.ground_truth is not None:
        field = groundtruth_field(cfg, pair)
    else:
        field, _ = estimate_image_domain(cfg, pair.image1, pair.image2, pair.stereo)
    reports = []
    for rate in cfg.rates:
        for seed in cfg.seeds:
            s = sense(pair, rate, seed, cfg)
            reports.append((seed, bound_report(field, pair.image1, pair.image2, s.S1, s.S2, s.Y1, s.Y2)))
    rows = [r for _, r in reports]
    write_bound_csv(out / "bounds.csv", rows, {"dataset": cfg.dataset.name, **cfg.summary()})
    print("rate,seed,data_image,data_compressed,sandwich_holds")
    for seed, r in reports:
        print(f"{r.rate:g},{seed},{r.data_image:.6g},{r.data_compressed:.6g},{r.sandwich_holds}")


def cmd_reconstruct(cfg, out):
    pair = load_pair(cfg.dataset)
    rows = []
    for rate in cfg.rates:
        for seed in cfg.seeds:
            res = run_reconstruction(cfg, pair, rate, seed)
            for scheme, (i1, i2) in res["images"].items():
                tag = f"{scheme}_r{rate:g}_s{seed}"
                save_image(out / f"{tag}_I1.pgm", i1)
                save_image(out / f"{tag}_I2.pgm", i2)
            rows += [{**r, "seed": seed} for r in res["rows"].values()]
    recon = cfg.recon_params()
    extra = {"dataset": cfg.dataset.name, **cfg.summary(), "eps": recon.eps, "eps_scale": recon.eps_scale,
             "gamma": recon.gamma, "wavelet": recon.wavelet, "levels": recon.levels}
    write_report_csv(out / "reconstruct.csv", rows, extra)
    print("rate,seed,scheme,psnr_I1,psnr_I2,psnr_mean")
    for r in rows:
        print(f"{r['rate']:g},{r['seed']},{r['scheme']},{r['psnr_I1']:.3f},{r['psnr_I2']:.3f},{r['psnr_mean']:.3f}")


def cmd_bench(cfg, out, args):
    res = run_suite(args.suite, cfg, out, plot=not args.no_plot)
    print(f"suite,csv,figure,new_points")
    print(f"{args.suite},{res['csv']},{res.get('figure', '')},{res['ran']}")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "defaults":
        sys.stdout.write(dump_defaults())
        return 0
    try:
        suite_ds = SUITES[args.suite].dataset if args.command == "bench" else None
        cfg = resolve_config(args, suite_ds)
        out = Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        if args.command == "sense":
            cmd_sense(cfg, out)
        elif args.command == "estimate":
            _estimate(cfg, out, write_prediction=False)
        elif args.command == "predict":
            _estimate(cfg, out, write_prediction=True)
        elif args.command == "bounds":
            cmd_bounds(cfg, out)
        elif args.command == "reconstruct":
            cmd_reconstruct(cfg, out)
        elif args.command == "bench":
            cmd_bench(cfg, out, args)
    except NumericalError as exc:
        print(f"cdce: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (FileNotFoundError, DatasetMissing, ConfigError, ParseError, UnsupportedFormat) as exc:
        print(f"cdce: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except CDCEError as exc:
        print(f"cdce: {exc}", file=sys.stderr)
        return EXIT_INPUT
    return 0


if __name__ == "__main__":
    sys.exit(main())
