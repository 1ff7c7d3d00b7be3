"""H-MPHD fusion: mean-evaluation path, WAA baseline, exact cell-wise oracle."""

import numpy as np
import pytest

from rfsfuse.densities import (
    GaussianComponent,
    GmDensity,
    MppDensity,
    SpacePartition,
)
from rfsfuse.fusion_phd import FusionInputPhd, fused_cardinality, hmphd_fuse, waa_fuse_phd
from rfsfuse.weights import WeightMap


def gaussian(weight, px, py, spos=20.0):
    return GaussianComponent(weight, [px, py, 0.0, 0.0],
                             np.diag([spos ** 2, spos ** 2, 25.0, 25.0]))


def random_density(rng, n=3, spread=900.0, spos=(10.0, 40.0)):
    return MppDensity(GmDensity(tuple(
        gaussian(rng.uniform(0.2, 1.5), rng.uniform(-spread, spread),
                 rng.uniform(-spread, spread), rng.uniform(*spos))
        for _ in range(n))))


PART = SpacePartition.regular([[-1000, 1000], [-1000, 1000]], (10, 10))


def heterogeneous_map(rng, n_sensors):
    raw = rng.uniform(0.05, 1.0, size=(n_sensors, PART.n_cells))
    weights = raw / raw.sum(axis=0)
    return WeightMap(PART, weights, raw, np.zeros(PART.n_cells, dtype=bool))


class TestWaaFusePhd:
    def test_convexity_fixed_point(self, rng):
        d = random_density(rng)
        fused = waa_fuse_phd([d, d], [0.3, 0.7])
        pts = rng.uniform(-900, 900, size=(50, 2))
        np.testing.assert_allclose(
            fused.intensity.position_marginal().evaluate(pts),
            d.intensity.position_marginal().evaluate(pts), rtol=1e-12)

    def test_degenerate_weights_select_first(self, rng):
        a, b = random_density(rng), random_density(rng)
        fused = waa_fuse_phd([a, b], [1.0, 0.0])
        pts = rng.uniform(-900, 900, size=(30, 2))
        np.testing.assert_allclose(
            fused.intensity.position_marginal().evaluate(pts),
            a.intensity.position_marginal().evaluate(pts), rtol=1e-12)

    def test_uniform_weights_average_cardinality(self):
        a = MppDensity(GmDensity((gaussian(10.0, 0, 0),)))
        b = MppDensity(GmDensity((gaussian(6.0, 100, 0),)))
        fused = waa_fuse_phd([a, b], [0.5, 0.5])
        assert fused.mean_cardinality == pytest.approx(8.0)

    def test_weight_sum_violation(self, rng):
        with pytest.raises(ValueError):
            waa_fuse_phd([random_density(rng)], [0.7])


class TestHmphdFuse:
    def test_single_sensor_identity(self, rng):
        d = random_density(rng)
        wm = WeightMap.constant(PART, [1.0])
        fused = hmphd_fuse(FusionInputPhd((d,), weight_map=wm))
        for c_in, c_out in zip(d.intensity.components, fused.intensity.components):
            assert c_out.weight == c_in.weight
            np.testing.assert_array_equal(c_out.mean, c_in.mean)
            np.testing.assert_array_equal(c_out.cov, c_in.cov)

    def test_constant_map_equals_waa_exactly(self, rng):
        # bit-for-bit equality on component lists, 50 random instances
        for _ in range(50):
            n = rng.integers(2, 5)
            dens = tuple(random_density(rng, n=int(rng.integers(1, 5)))
                         for _ in range(n))
            raw = rng.uniform(0.1, 1.0, size=n)
            w = raw / raw.sum()
            wmap = WeightMap.constant(PART, w)
            via_map = hmphd_fuse(FusionInputPhd(dens, weight_map=wmap))
            via_waa = waa_fuse_phd(dens, w)
            assert len(via_map.intensity) == len(via_waa.intensity)
            for a, b in zip(via_map.intensity.components,
                            via_waa.intensity.components):
                assert a.weight == b.weight
                assert np.array_equal(a.mean, b.mean)
                assert np.array_equal(a.cov, b.cov)

    def test_two_sensor_hand_case(self):
        # one Gaussian each viewing the same spot; cell weights 0.8/0.2
        # at their means -> fused components 0.8 and 0.2, mass 1.0
        a = MppDensity(GmDensity((gaussian(1.0, -550.0, -545.0),)))
        b = MppDensity(GmDensity((gaussian(1.0, -545.0, -550.0),)))
        weights = np.full((2, PART.n_cells), 0.5)
        cell = PART.locate([-550.0, -550.0])
        weights[0, cell], weights[1, cell] = 0.8, 0.2
        wm = WeightMap(PART, weights, weights, np.zeros(PART.n_cells, bool))
        fused = hmphd_fuse(FusionInputPhd((a, b), weight_map=wm))
        got = [c.weight for c in fused.intensity.components]
        assert got[0] == pytest.approx(0.8)
        assert got[1] == pytest.approx(0.2)
        assert fused.mean_cardinality == pytest.approx(1.0, abs=1e-9)

    def test_mass_matches_mean_evaluated_weight_sum(self, rng):
        dens = tuple(random_density(rng) for _ in range(3))
        wm = heterogeneous_map(rng, 3)
        inp = FusionInputPhd(dens, weight_map=wm)
        fused = hmphd_fuse(inp)
        expected = sum(
            wm.weights[i, PART.locate(c.mean[:2])] * c.weight
            for i, d in enumerate(dens) for c in d.intensity.components)
        assert fused.mean_cardinality == pytest.approx(expected, abs=1e-9)

    def test_empty_sensor_list_rejected(self):
        with pytest.raises(ValueError):
            FusionInputPhd((), weight_map=WeightMap.constant(PART, [1.0]))

    def test_fused_intensity_never_exceeds_sum(self, rng):
        dens = tuple(random_density(rng) for _ in range(3))
        wm = heterogeneous_map(rng, 3)
        fused = hmphd_fuse(FusionInputPhd(dens, weight_map=wm))
        pts = rng.uniform(-900, 900, size=(200, 2))
        total = np.zeros(200)
        for d in dens:
            total += d.intensity.position_marginal().evaluate(pts)
        fused_vals = fused.intensity.position_marginal().evaluate(pts)
        assert np.all(fused_vals <= total + 1e-12)

    def test_exact_vs_approximate_consistency(self, rng):
        # components fully inside single cells: the mean-evaluation path
        # matches the restrict/fuse/union path pointwise
        centers = PART.centers()
        picks = rng.choice(PART.n_cells, size=4, replace=False)
        dens = []
        for i in range(2):
            comps = tuple(gaussian(rng.uniform(0.5, 1.0),
                                   centers[c][0], centers[c][1], spos=8.0)
                          for c in picks[2 * i:2 * i + 2])
            dens.append(MppDensity(GmDensity(comps)))
        wm = heterogeneous_map(rng, 2)
        inp = FusionInputPhd(tuple(dens), weight_map=wm)
        approx = hmphd_fuse(inp)
        exact = hmphd_fuse(inp, exact=True)
        xs = np.linspace(-990, 990, 100)
        gx, gy = np.meshgrid(xs, xs, indexing="ij")
        pts = np.column_stack([gx.ravel(), gy.ravel()])
        va = approx.intensity.position_marginal().evaluate(pts)
        ve = exact.intensity.position_marginal().evaluate(pts)
        np.testing.assert_allclose(ve, va, atol=1e-5 * va.max())


class TestFusedCardinality:
    def test_homogeneous_weighted_sum(self, rng):
        dens = tuple(random_density(rng) for _ in range(3))
        w = np.array([0.5, 0.3, 0.2])
        got = fused_cardinality(FusionInputPhd(dens, scalar_weights=w))
        expected = sum(wi * d.mean_cardinality for wi, d in zip(w, dens))
        assert got == pytest.approx(expected, rel=1e-12)

    def test_zero_weight_region_contributes_nothing(self, rng):
        d = MppDensity(GmDensity((gaussian(2.0, -550.0, -550.0),)))
        other = random_density(rng)
        weights = np.vstack([np.zeros(PART.n_cells), np.ones(PART.n_cells)])
        wm = WeightMap(PART, weights, weights, np.zeros(PART.n_cells, bool))
        got = fused_cardinality(FusionInputPhd((d, other), weight_map=wm))
        assert got == pytest.approx(other.mean_cardinality, rel=1e-12)

    def test_consistent_with_fuse_mass(self, rng):
        for _ in range(10):
            dens = tuple(random_density(rng) for _ in range(3))
            wm = heterogeneous_map(rng, 3)
            inp = FusionInputPhd(dens, weight_map=wm)
            assert fused_cardinality(inp) == pytest.approx(
                hmphd_fuse(inp).mean_cardinality, abs=1e-9)

    def test_hand_case_mass_one(self):
        a = MppDensity(GmDensity((gaussian(1.0, -550.0, -545.0),)))
        b = MppDensity(GmDensity((gaussian(1.0, -545.0, -550.0),)))
        weights = np.full((2, PART.n_cells), 0.5)
        cell = PART.locate([-550.0, -550.0])
        weights[0, cell], weights[1, cell] = 0.8, 0.2
        wm = WeightMap(PART, weights, weights, np.zeros(PART.n_cells, bool))
        got = fused_cardinality(FusionInputPhd((a, b), weight_map=wm))
        assert got == pytest.approx(1.0, abs=1e-9)
