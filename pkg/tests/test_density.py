import math

import numpy as np
import pytest
from scipy.stats import norm

from udenoise.density import (DensityError, DensityEstimate, GridAxis, Kernel,
                              context_kde, histogram_estimate, kde,
                              l1_distance, load_density_csv,
                              silverman_bandwidth, super_symbols)


class TestKernel:
    @pytest.mark.parametrize("kind", ["gaussian", "epanechnikov", "box"])
    def test_normalized_symmetric_nonnegative(self, kind):
        k = Kernel(kind, 1)
        # midpoint rule so the box kernel's jump edges fall between nodes
        step = 1e-4
        u = -8.0 + (np.arange(160_000) + 0.5) * step
        vals = k.profile(u)
        assert np.all(vals >= 0)
        assert vals.sum() * step == pytest.approx(1.0, abs=1e-6)
        np.testing.assert_allclose(vals, vals[::-1], atol=1e-12)

    def test_unknown_kind(self):
        with pytest.raises(DensityError):
            Kernel("triangle", 1)


class TestSilverman:
    def test_standard_normal(self):
        rng = np.random.default_rng(0)
        h = silverman_bandwidth(rng.normal(0, 1, 10_000))
        assert abs(h - 1.06 * 10_000 ** -0.2) / (1.06 * 10_000 ** -0.2) < 0.1

    def test_two_samples(self):
        h = silverman_bandwidth(np.array([0.0, 1.0]))
        assert h == pytest.approx(1.06 * math.sqrt(0.5) * 2 ** -0.2, rel=1e-6)
        assert h == pytest.approx(0.6524, abs=1e-3)

    def test_identical_samples_fallback(self):
        with pytest.warns(RuntimeWarning):
            h = silverman_bandwidth(np.full(50, 0.3), support_range=(0.0, 1.0))
        assert h == pytest.approx(0.01)

    def test_needs_two_samples(self):
        with pytest.raises(DensityError):
            silverman_bandwidth(np.array([1.0]))


class TestKde:
    def test_single_sample_peak(self):
        axes = (GridAxis(origin=-1.0, step=0.5, count=5),)
        f = kde(np.array([0.0]), h=1.0, axes=axes, method="direct")
        idx = 2  # grid point at 0
        assert f.values[idx] == pytest.approx(0.3989423, abs=1e-6)

    def test_box_kernel_gap(self):
        axes = (GridAxis(origin=-2.0, step=0.5, count=9),)
        f = kde(np.array([-1.0, 1.0]), kernel=Kernel("box", 1), h=1.0,
                axes=axes, method="direct")
        assert f.values[4] == 0.0  # y=0 is outside both box supports

    def test_normal_l1(self):
        rng = np.random.default_rng(1)
        samples = rng.normal(0, 1, 10_000)
        f = kde(samples)
        grid = f.grid_points()[0]
        exact = norm.pdf(grid)
        err = np.abs(f.values - exact).sum() * f.axes[0].step
        assert err < 0.06

    def test_integrates_to_one(self):
        rng = np.random.default_rng(2)
        for _ in range(5):
            samples = rng.gamma(2.0, 1.0, 2000)
            f = kde(samples)
            assert f.integral() == pytest.approx(1.0, abs=1e-4)

    def test_binned_matches_direct(self):
        rng = np.random.default_rng(3)
        for _ in range(10):
            samples = rng.normal(rng.uniform(-2, 2), rng.uniform(0.5, 2), 500)
            h = silverman_bandwidth(samples)
            fb = kde(samples, h=h, method="binned")
            fd = kde(samples, h=h, axes=fb.axes, method="direct")
            dev = np.abs(fb.values - fd.values).max()
            assert dev < 1e-3 * fd.values.max()

    def test_empty_rejected(self):
        with pytest.raises(DensityError):
            kde(np.array([]))

    def test_grid_must_cover_samples(self):
        axes = (GridAxis(origin=0.0, step=0.1, count=11),)
        with pytest.raises(DensityError):
            kde(np.array([0.5, 5.0]), h=0.1, axes=axes)

    def test_csv_round_trip(self, tmp_path):
        rng = np.random.default_rng(4)
        f = kde(rng.normal(0, 1, 500))
        path = tmp_path / "density.csv"
        f.to_csv(path)
        g = load_density_csv(path)
        np.testing.assert_allclose(g.values, f.values, rtol=1e-12)
        assert g.axes[0].count == f.axes[0].count
        # kernel metadata survives the file round trip
        assert g.kernel is not None and g.kernel.kind == f.kernel.kind
        assert g.bandwidth == pytest.approx(f.bandwidth, rel=1e-12)


class TestHistogram:
    def test_all_mass_one_bin(self):
        f = histogram_estimate(np.array([0.1, 0.2, 0.3, 0.4]), h=0.5, anchor=0.0)
        assert f.values.shape == (1,)
        assert f.values[0] == pytest.approx(2.0)

    def test_uniform_concentration(self):
        rng = np.random.default_rng(5)
        f = histogram_estimate(rng.random(100_000), h=0.1, anchor=0.0)
        np.testing.assert_allclose(f.values, 1.0, atol=0.05)

    def test_single_sample(self):
        f = histogram_estimate(np.array([0.25]), h=0.5, anchor=0.0)
        assert f.values[0] == pytest.approx(2.0)

    def test_exact_integral(self):
        rng = np.random.default_rng(6)
        f = histogram_estimate(rng.normal(0, 1, 1234), h=0.37, anchor=0.1)
        assert f.integral() == pytest.approx(1.0, abs=1e-12)

    def test_empty_rejected(self):
        with pytest.raises(DensityError):
            histogram_estimate(np.array([]), h=0.5)


class TestL1Distance:
    def _tabulate(self, fn, lo, hi, count):
        axis = GridAxis(origin=lo, step=(hi - lo) / (count - 1), count=count)
        return DensityEstimate(axes=(axis,), values=fn(axis.points()),
                               bandwidth=1.0, sample_count=1)

    def test_identity(self):
        f = self._tabulate(norm.pdf, -6, 6, 1001)
        assert l1_distance(f, f) == 0.0

    def test_disjoint_normals(self):
        f = self._tabulate(norm.pdf, -10, 110, 24001)
        g = self._tabulate(lambda x: norm.pdf(x, loc=100), -10, 110, 24001)
        assert l1_distance(f, g) == pytest.approx(2.0, abs=1e-6)

    def test_shifted_uniforms(self):
        def uniform(lo, hi):
            return lambda x: ((x >= lo) & (x < hi)).astype(float) / (hi - lo)
        # grid step 1/2000 nests both supports exactly
        f = self._tabulate(uniform(0.0, 1.0), -0.5, 2.0, 5001)
        g = self._tabulate(uniform(0.5, 1.5), -0.5, 2.0, 5001)
        assert l1_distance(f, g) == pytest.approx(1.0, abs=1e-3)

    def test_mismatched_grids(self):
        f = self._tabulate(norm.pdf, -6, 6, 101)
        g = self._tabulate(norm.pdf, -5, 6, 101)
        with pytest.raises(DensityError):
            l1_distance(f, g)


class TestSuperSymbols:
    def test_windows(self):
        seq = np.arange(10.0)
        all_windows = super_symbols(seq, 1)
        assert all_windows.shape == (8, 3)
        np.testing.assert_array_equal(all_windows[0], [0, 1, 2])

    def test_jumping_subsequences_disjoint(self):
        seq = np.arange(10.0)
        s1 = super_symbols(seq, 1, subsequence=1)
        s2 = super_symbols(seq, 1, subsequence=2)
        np.testing.assert_array_equal(s1[:, 1], [1, 4, 7])  # centers 2,5,8
        np.testing.assert_array_equal(s2[:, 1], [2, 5, 8])  # centers 3,6,9
        assert not set(map(tuple, s1)) & set(map(tuple, s2))

    def test_too_short(self):
        with pytest.raises(DensityError):
            super_symbols(np.array([1.0, 2.0]), 1)


class TestContextKde:
    def test_single_super_symbol_peak(self):
        seq = np.zeros(3)
        axes = tuple(GridAxis(origin=-1.0, step=1.0, count=3) for _ in range(3))
        f = context_kde(seq, 1, 1, h=1.0, axes=axes, method="direct")
        assert f.values[1, 1, 1] == pytest.approx(0.3989423 ** 3, abs=1e-6)
        assert f.values[1, 1, 1] == pytest.approx(0.063494, abs=1e-5)

    def test_product_normal_l1(self):
        rng = np.random.default_rng(7)
        seq = rng.normal(0, 1, 30_000)
        f = context_kde(seq, 1, 1, num_points=48)
        pts = f.grid_points()
        exact = norm.pdf(pts[0])[:, None, None] * norm.pdf(pts[1])[None, :, None] \
            * norm.pdf(pts[2])[None, None, :]
        err = np.abs(f.values - exact).sum() * f.cell_volume
        assert err < 0.25

    def test_requires_k_ge_1(self):
        with pytest.raises(DensityError):
            context_kde(np.arange(5.0), 0, 1)
