import csv

import numpy as np
import pytest
import yaml
from PIL import Image as PILImage

from cdce.errors import ConfigError, NumericalError
from cdce.harness import cli
from cdce.harness.bench import read_rows, run_suite
from cdce.harness.config import dump_defaults, from_dict, load_config
from cdce.harness.datasets import DatasetMissing, load_pair, sha256

SMALL = {"dataset": {"preset": "synthetic", "shape": [24, 32], "disparities": [1, 3]},
         "rates": [0.5], "seeds": [0], "energy": {"window": [4, 0], "lam": 1e3},
         "optimizer": {"max_sweeps": 2}, "recon": {"max_iters": 20, "polish_iters": 20}}


@pytest.fixture
def small_config(tmp_path):
    p = tmp_path / "small.yaml"
    p.write_text(yaml.safe_dump(SMALL))
    return p


def _rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


class TestConfig:
    def test_defaults_round_trip_through_yaml(self):
        text = dump_defaults()
        again = from_dict(yaml.safe_load(text))
        assert again.to_dict() == yaml.safe_load(text)

    @pytest.mark.parametrize("bad", [
        {"rates": [0.0]}, {"rates": [1.5]}, {"rates": []}, {"seeds": []}, {"matrix": "fourier"},
        {"quantize_bits": [1]}, {"energy": {"mode": "region"}}, {"energy": {"lam": -1}},
        {"optimizer": {"mode": "bp"}}, {"dataset": "middlebury"}, {"colour": True},
        {"energy": {"lamda": 3}}, {"recon": {"gamma": 0}},
    ])
    def test_invalid_configs(self, bad):
        with pytest.raises(ConfigError):
            from_dict(bad)

    def test_presets_pick_dataset_windows(self):
        assert from_dict({"dataset": "venus"}).energy.window == (20, 0)
        assert from_dict({"dataset": "tsukuba"}).energy.window == (16, 0)

    def test_summary_columns_make_rows_reproducible(self):
        s = from_dict({}).summary()
        for key in ("matrix", "lam", "tau", "wx", "wy", "mode"):
            assert key in s

    def test_missing_config_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_config(tmp_path / "nope.yaml")


class TestDatasets:
    def _write_colour_pair(self, root):
        rng = np.random.default_rng(0)
        (root / "pair").mkdir()
        for name in ("a.ppm", "b.ppm"):
            PILImage.fromarray(rng.integers(0, 256, (6, 8, 3), dtype=np.uint8), "RGB").save(root / "pair" / name)
        PILImage.fromarray(np.full((6, 8), 16, np.uint8), "L").save(root / "pair" / "gt.pgm")

    def test_colour_files_are_converted_to_luma(self, tmp_path):
        self._write_colour_pair(tmp_path)
        cfg = from_dict({"dataset": {"name": "mine", "kind": "files", "root": str(tmp_path),
                                     "image1": "pair/a.ppm", "image2": "pair/b.ppm",
                                     "ground_truth": "pair/gt.pgm", "scale_divisor": 8}})
        pair = load_pair(cfg.dataset)
        assert pair.image1.shape == (6, 8)
        assert np.allclose(pair.ground_truth.mh, 2.0)

    def test_checksums(self, tmp_path):
        self._write_colour_pair(tmp_path)
        ds = {"name": "mine", "kind": "files", "root": str(tmp_path), "image1": "pair/a.ppm",
              "image2": "pair/b.ppm"}
        good = sha256(tmp_path / "pair" / "a.ppm")
        load_pair(from_dict({"dataset": {**ds, "sha256": {"image1": good}}}).dataset)
        with pytest.raises(ConfigError):
            load_pair(from_dict({"dataset": {**ds, "sha256": {"image1": "0" * 64}}}).dataset)

    def test_missing_files(self, tmp_path, monkeypatch):
        monkeypatch.setenv("CDCE_DATA_DIR", str(tmp_path))
        with pytest.raises(DatasetMissing):
            load_pair(from_dict({"dataset": "venus"}).dataset)


class TestCli:
    def test_defaults(self, capsys):
        assert cli.main(["defaults"]) == 0
        assert "energy:" in capsys.readouterr().out

    def test_sense_is_deterministic(self, small_config, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        assert cli.main(["sense", "--config", str(small_config), "--out", str(a)]) == 0
        assert cli.main(["sense", "--config", str(small_config), "--out", str(b)]) == 0
        for name in ("view1.cdce", "view2.cdce"):
            assert (a / name).read_bytes() == (b / name).read_bytes()

    def test_flags_override_config(self, small_config, tmp_path):
        out = tmp_path / "q"
        assert cli.main(["sense", "--config", str(small_config), "--out", str(out), "--rate", "0.25",
                         "--seed", "3", "--quantize-bits", "4", "--same-matrix"]) == 0
        raw = (out / "view1.cdce").read_bytes()
        assert raw[:4] == b"CDCE" and raw[27] == 4  # bits byte after magic..seed

    def test_predict_writes_outputs_with_config(self, small_config, tmp_path):
        out = tmp_path / "p"
        assert cli.main(["predict", "--config", str(small_config), "--out", str(out)]) == 0
        for name in ("field.csv", "trace.csv", "field.png", "prediction.pgm", "predict.csv"):
            assert (out / name).is_file(), name
        (row,) = _rows(out / "predict.csv")
        for key in ("seed", "rate", "lam", "tau", "wx", "matrix", "error_rate", "psnr_i2"):
            assert key in row

    def test_bounds_and_reconstruct(self, small_config, tmp_path):
        out = tmp_path / "r"
        assert cli.main(["bounds", "--config", str(small_config), "--out", str(out)]) == 0
        assert _rows(out / "bounds.csv")[0]["sandwich_holds"] in ("True", "False")
        assert cli.main(["reconstruct", "--config", str(small_config), "--out", str(out)]) == 0
        schemes = {r["scheme"] for r in _rows(out / "reconstruct.csv")}
        assert schemes == {"independent", "joint-estimated-A", "joint-groundtruth-A"}

    def test_missing_dataset_exit_code(self, tmp_path, monkeypatch, capsys):
        monkeypatch.setenv("CDCE_DATA_DIR", str(tmp_path))
        assert cli.main(["estimate", "--dataset", "venus", "--out", str(tmp_path / "o")]) == 2
        assert "missing" in capsys.readouterr().err

    def test_missing_config_exit_code(self, tmp_path):
        assert cli.main(["sense", "--config", str(tmp_path / "none.yaml")]) == 2

    def test_invalid_config_exit_code(self, tmp_path):
        p = tmp_path / "bad.yaml"
        p.write_text("rates: [2.0]\n")
        assert cli.main(["sense", "--config", str(p)]) == 2

    def test_numerical_failure_exit_code(self, small_config, tmp_path, monkeypatch):
        def boom(cfg, out):
            raise NumericalError("no convergence", residual=1.0)

        monkeypatch.setattr(cli, "cmd_sense", boom)
        assert cli.main(["sense", "--config", str(small_config), "--out", str(tmp_path)]) == 3


class TestBench:
    def test_restart_skips_finished_points(self, small_config, tmp_path):
        cfg = load_config(small_config)
        first = run_suite("fig2_venus", cfg, tmp_path, dataset=cfg.dataset)
        assert first["ran"] == 1 and first["figure"].is_file()
        rows = read_rows(first["csv"])
        assert len(rows) == 1 and rows[0]["scheme"] == "compressed"
        again = run_suite("fig2_venus", load_config(small_config), tmp_path, dataset=cfg.dataset, plot=False)
        assert again["ran"] == 0
        assert len(read_rows(first["csv"])) == 1

    def test_extending_the_grid_appends(self, small_config, tmp_path):
        cfg = load_config(small_config)
        run_suite("fig7_quantization", cfg, tmp_path, dataset=cfg.dataset, plot=False)
        cfg2 = load_config(small_config)
        cfg2.seeds = (0, 1)
        res = run_suite("fig7_quantization", cfg2, tmp_path, dataset=cfg2.dataset, plot=False)
        assert res["ran"] == 1
        rows = read_rows(res["csv"])
        assert {r["scheme"] for r in rows} == {"unquantized", "q2", "q3", "q4"}
        assert len(rows) == 8

    def test_cli_bench(self, small_config, tmp_path, capsys):
        assert cli.main(["bench", "--suite", "fig4_regularization", "--config", str(small_config),
                         "--out", str(tmp_path), "--no-plot"]) == 0
        rows = _rows(tmp_path / "fig4_regularization.csv")
        assert {r["scheme"] for r in rows} == {"lambda-0", "lambda-tuned"}
        assert not (tmp_path / "fig4_regularization.png").exists()
