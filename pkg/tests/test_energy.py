import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from cdce.core import MotionField
from cdce.energy import (BOUND_COLUMNS, CompressedData, EnergyParams, bound_report, data_cost_compressed,
                         data_cost_image, pairwise, smoothness_cost, total_energy, write_bound_csv)
from cdce.errors import ConfigError, ShapeError
from cdce.sensing import SCRAMBLED, build_sensing, measure
from cdce.synthetic import layered_stereo
from cdce.warp import build_warp, compressed_predict

TAU = 2.0


def field(mh, mv=None, window=(20, 20), block=1, shape=None):
    mh = np.asarray(mh)
    mv = np.zeros_like(mh) if mv is None else np.asarray(mv)
    return MotionField(mh, mv, shape or mh.shape, window, block)


def test_params_validation():
    with pytest.raises(ConfigError):
        EnergyParams(lam=-1)
    with pytest.raises(ConfigError):
        EnergyParams(tau=0.5)
    with pytest.raises(ConfigError):
        EnergyParams(block=0)


class TestSmoothness:
    P = EnergyParams(lam=1.0, tau=TAU)

    def test_constant_field_is_free(self):
        assert smoothness_cost(field(np.full((3, 4), 2)), self.P) == 0.0

    def test_single_outlier_pays_truncated_twice(self):
        mh = np.zeros((2, 2), dtype=int)
        mh[0, 0] = int(TAU) + 5
        assert smoothness_cost(field(mh), self.P) == 2 * TAU

    def test_unit_step_costs_one_per_row(self):
        rows, cols = 5, 6
        mh = np.zeros((rows, cols), dtype=int)
        mh[:, 3:] = 1
        assert smoothness_cost(field(mh), self.P) == rows * 1.0

    @given(arrays(np.int64, (3, 4), elements=st.integers(-5, 5)),
           arrays(np.int64, (3, 4), elements=st.integers(-5, 5)))
    def test_bounded_by_tau_per_edge(self, mh, mv):
        edges = 3 * 3 + 2 * 4
        assert 0 <= smoothness_cost(field(mh, mv), self.P) <= TAU * edges

    @given(st.integers(-9, 9), st.integers(-9, 9), st.integers(-9, 9), st.integers(-9, 9))
    def test_pairwise_is_symmetric_and_zero_only_on_equal(self, a, b, c, d):
        v = pairwise(a - c, b - d, TAU)
        assert v == pairwise(c - a, d - b, TAU)
        assert (v == 0) == (a == c and b == d)


class TestDataCosts:
    def test_warped_image_costs_nothing(self, small_image, rng):
        f = field(rng.integers(0, 3, small_image.shape), window=(2, 0))
        i2 = build_warp(f).predict(small_image)
        assert data_cost_image(f, small_image, i2) == 0.0

    def test_constant_offset(self, small_image):
        c = 3.0
        f = field(np.zeros(small_image.shape, dtype=int))
        assert data_cost_image(f, small_image, small_image + c) == pytest.approx(small_image.size * c**2)

    def test_shape_mismatch(self, small_image):
        with pytest.raises(ShapeError):
            data_cost_image(field(np.zeros((2, 2), dtype=int)), small_image, small_image)

    def test_compressed_zero_when_y2_is_prediction(self, small_image, rng):
        n1, n2 = small_image.shape
        S1 = build_sensing(SCRAMBLED, 4, n1, n2, 0)
        S2 = build_sensing(SCRAMBLED, 4, n1, n2, 1)
        f = field(rng.integers(0, 3, (n1, n2)), window=(2, 0))
        Y1 = measure(small_image, S1)
        Y2 = compressed_predict(build_warp(f), Y1, S1, S2)
        assert data_cost_compressed(f, Y1, Y2, S1, S2) == pytest.approx(0.0, abs=1e-18)

    def test_rate_one_matches_image_domain(self, small_image, rng):
        n1, n2 = small_image.shape
        S1 = build_sensing(SCRAMBLED, n2, n1, n2, 0)
        S2 = build_sensing(SCRAMBLED, n2, n1, n2, 1)
        i2 = rng.uniform(0, 255, small_image.shape)
        f = field(rng.integers(0, 3, (n1, n2)), window=(2, 0))
        e_c = data_cost_compressed(f, measure(small_image, S1), measure(i2, S2), S1, S2)
        assert e_c == pytest.approx(data_cost_image(f, small_image, i2), rel=1e-10)

    def test_cached_preimage_is_reused(self, small_image):
        n1, n2 = small_image.shape
        S = build_sensing(SCRAMBLED, 3, n1, n2, 0)
        Y = measure(small_image, S)
        data = CompressedData(Y, Y, S, S)
        f0 = field(np.zeros((n1, n2), dtype=int))
        assert data.data_cost(f0) == data_cost_compressed(f0, Y, Y, S, S)
        assert not data.pre1.flags.writeable

    def test_mismatched_sensing(self, small_image):
        n1, n2 = small_image.shape
        S1 = build_sensing(SCRAMBLED, 3, n1, n2, 0)
        S2 = build_sensing(SCRAMBLED, 3, n1, n2, 1)
        with pytest.raises(ConfigError):
            CompressedData(measure(small_image, S1), measure(small_image, S1), S2, S2)


def test_total_energy_terms(small_image, rng):
    n1, n2 = small_image.shape
    S1 = build_sensing(SCRAMBLED, 4, n1, n2, 0)
    S2 = build_sensing(SCRAMBLED, 4, n1, n2, 1)
    Y1, Y2 = measure(small_image, S1), measure(rng.uniform(0, 255, (n1, n2)), S2)
    f = field(rng.integers(0, 3, (n1, n2)), window=(2, 0))
    d = data_cost_compressed(f, Y1, Y2, S1, S2)
    assert total_energy(f, Y1, Y2, S1, S2, EnergyParams(lam=0)) == d
    P = EnergyParams(lam=7.0, tau=TAU)
    assert total_energy(f, Y1, Y2, S1, S2, P) == pytest.approx(d + 7.0 * smoothness_cost(f, P))
    const = field(np.ones((n1, n2), dtype=int), window=(2, 0))
    assert total_energy(const, Y1, Y2, S1, S2, P) == data_cost_compressed(const, Y1, Y2, S1, S2)


class TestBoundReport:
    @pytest.fixture
    def scene(self):
        pair = layered_stereo((16, 24), disparities=(1, 3), seed=0, n_layers=2)
        gt = pair.ground_truth.to_motion_field((4, 0))
        return pair, gt

    def _sensing(self, shape, m, seeds=(0, 1)):
        return [build_sensing(SCRAMBLED, m, *shape, s) for s in seeds]

    def test_rate_one_collapses(self, scene):
        pair, f = scene
        S1, S2 = self._sensing(pair.image1.shape, pair.image1.shape[1])
        r = bound_report(f, pair.image1, pair.image2, S1, S2)
        assert r.eta == pytest.approx(0.0, abs=1e-8)
        assert r.delta_emp == pytest.approx(0.0, abs=1e-10)
        assert r.c_lower == pytest.approx(0.0, abs=1e-6) and r.c_upper == pytest.approx(0.0, abs=1e-6)
        assert r.data_compressed == pytest.approx(r.data_image, rel=1e-9)
        assert r.sandwich_holds

    def test_identity_warp_has_unit_sigma(self, scene):
        pair, _ = scene
        S1, S2 = self._sensing(pair.image1.shape, 8)
        r = bound_report(MotionField.zeros(pair.image1.shape), pair.image1, pair.image2, S1, S2)
        assert np.all(r.row_sigma_max == 1.0)

    @pytest.mark.parametrize("m", [2, 6, 12, 20])
    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_supported_bounds_hold(self, scene, m, seed):
        pair, f = scene
        S1, S2 = self._sensing(pair.image1.shape, m, (2 * seed, 2 * seed + 1))
        r = bound_report(f, pair.image1, pair.image2, S1, S2)
        assert min(r.alpha, r.eta, r.c_lower, r.c_upper) >= 0
        assert r.upper_holds
        assert r.signed_lower_holds

    def test_upper_constant_decreases_with_rate(self, scene):
        pair, f = scene
        c = []
        for m in (4, 12, 20, 24):
            S1, S2 = self._sensing(pair.image1.shape, m)
            c.append(bound_report(f, pair.image1, pair.image2, S1, S2).c_upper)
        assert all(a >= b for a, b in zip(c, c[1:]))

    def test_csv_row(self, scene, tmp_path):
        pair, f = scene
        S1, S2 = self._sensing(pair.image1.shape, 8)
        r = bound_report(f, pair.image1, pair.image2, S1, S2)
        p = tmp_path / "b.csv"
        write_bound_csv(p, [r], {"dataset": "x"})
        header = p.read_text().splitlines()[0].split(",")
        assert header == ["dataset", *BOUND_COLUMNS]
