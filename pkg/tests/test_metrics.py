"""OSPA metric against the exhaustive-permutation oracle."""

import itertools

import numpy as np
import pytest

from rfsfuse.metrics import OspaParams, cardinality_series, mean_cardinality_series, ospa
from oracles import brute_force_assignment


def ospa_brute(X, Y, c, p):
    """Reference OSPA via explicit permutation enumeration."""
    X = np.asarray(X, float).reshape(-1, 2)
    Y = np.asarray(Y, float).reshape(-1, 2)
    n, m = len(X), len(Y)
    if n == 0 and m == 0:
        return 0.0
    if n == 0 or m == 0:
        return c
    if n > m:
        X, Y, n, m = Y, X, m, n
    best = np.inf
    for perm in itertools.permutations(range(m), n):
        cost = sum(min(np.linalg.norm(X[i] - Y[j]), c) ** p
                   for i, j in zip(range(n), perm))
        best = min(best, cost)
    return float((((c ** p) * (m - n) + best) / m) ** (1.0 / p))


class TestOspa:
    def test_identical_sets_and_both_empty(self):
        pts = np.array([[0.0, 0.0], [10.0, 5.0]])
        assert ospa(pts, pts) == 0.0
        assert ospa([], []) == 0.0

    def test_pure_cardinality_penalty(self):
        params = OspaParams(order=1.0, cutoff=100.0)
        assert ospa([[0.0, 0.0]], [], params) == pytest.approx(100.0)
        assert ospa([], [[3.0, 4.0]], params) == pytest.approx(100.0)

    def test_matches_brute_force_three_vs_three(self, rng):
        params = OspaParams(order=1.0, cutoff=100.0)
        for _ in range(50):
            X = rng.uniform(-200, 200, size=(3, 2))
            Y = rng.uniform(-200, 200, size=(3, 2))
            assert ospa(X, Y, params) == pytest.approx(
                ospa_brute(X, Y, 100.0, 1.0), abs=1e-12)

    def test_matches_brute_force_unequal_sizes(self, rng):
        for p in (1.0, 2.0):
            params = OspaParams(order=p, cutoff=50.0)
            for _ in range(30):
                n, m = rng.integers(0, 6), rng.integers(0, 6)
                X = rng.uniform(-100, 100, size=(n, 2))
                Y = rng.uniform(-100, 100, size=(m, 2))
                assert ospa(X, Y, params) == pytest.approx(
                    ospa_brute(X, Y, 50.0, p), abs=1e-10)

    def test_symmetry(self, rng):
        params = OspaParams()
        for _ in range(20):
            X = rng.uniform(-100, 100, size=(rng.integers(0, 5), 2))
            Y = rng.uniform(-100, 100, size=(rng.integers(0, 5), 2))
            assert ospa(X, Y, params) == pytest.approx(ospa(Y, X, params), abs=1e-12)

    def test_triangle_inequality_random_triples(self, rng):
        params = OspaParams(order=1.0, cutoff=30.0)
        for _ in range(200):
            sets = [rng.uniform(-50, 50, size=(rng.integers(0, 6), 2))
                    for _ in range(3)]
            dxy = ospa(sets[0], sets[1], params)
            dyz = ospa(sets[1], sets[2], params)
            dxz = ospa(sets[0], sets[2], params)
            assert dxz <= dxy + dyz + 1e-9

    def test_monotone_in_cutoff_when_cardinalities_differ(self, rng):
        X = rng.uniform(-50, 50, size=(4, 2))
        Y = rng.uniform(-50, 50, size=(2, 2))
        vals = [ospa(X, Y, OspaParams(order=1.0, cutoff=c))
                for c in (10.0, 50.0, 100.0, 500.0)]
        assert all(b >= a - 1e-12 for a, b in zip(vals, vals[1:]))

    def test_value_bounded_by_cutoff(self, rng):
        params = OspaParams(order=1.5, cutoff=40.0)
        for _ in range(50):
            X = rng.uniform(-500, 500, size=(rng.integers(0, 6), 2))
            Y = rng.uniform(-500, 500, size=(rng.integers(0, 6), 2))
            assert 0.0 <= ospa(X, Y, params) <= 40.0 + 1e-12

    def test_invalid_params(self):
        with pytest.raises(ValueError):
            OspaParams(order=0.5)
        with pytest.raises(ValueError):
            OspaParams(cutoff=0.0)


class TestBruteForceAssignment:
    def test_diagonal_zeros(self):
        assert brute_force_assignment(np.eye(3) - np.eye(3)) == 0.0

    def test_antidiagonal_cheaper(self):
        costs = np.array([[5.0, 1.0], [2.0, 5.0]])
        assert brute_force_assignment(costs) == 3.0

    def test_matches_production_solver(self, rng):
        from scipy.optimize import linear_sum_assignment
        for _ in range(25):
            c = rng.uniform(0, 10, size=(4, 4))
            rows, cols = linear_sum_assignment(c)
            assert brute_force_assignment(c) == pytest.approx(
                c[rows, cols].sum(), abs=0.0)

    def test_refuses_large(self):
        with pytest.raises(ValueError):
            brute_force_assignment(np.zeros((7, 7)))


class TestCardinalitySeries:
    def test_empty_run(self):
        np.testing.assert_array_equal(cardinality_series([]), np.zeros(0))

    def test_constant_counts(self):
        est = [[0] * 12 for _ in range(5)]
        np.testing.assert_array_equal(cardinality_series(est), 12 * np.ones(5))

    def test_aggregation_is_arithmetic_mean(self):
        runs = [np.array([1.0, 2.0, 3.0]), np.array([3.0, 2.0, 1.0])]
        np.testing.assert_allclose(mean_cardinality_series(runs), [2.0, 2.0, 2.0])
