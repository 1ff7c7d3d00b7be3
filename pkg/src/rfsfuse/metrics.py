"""Multi-object error metrics: OSPA distance and cardinality statistics."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

__all__ = ["OspaParams", "ospa", "cardinality_series", "mean_cardinality_series"]


@dataclass(frozen=True)
class OspaParams:
    """Order p >= 1 and cutoff c > 0 (meters)."""

    order: float = 1.0
    cutoff: float = 100.0

    def __post_init__(self):
        if self.order < 1.0:
            raise ValueError(f"OSPA order must be >= 1, got {self.order}")
        if self.cutoff <= 0.0:
            raise ValueError(f"OSPA cutoff must be > 0, got {self.cutoff}")


def ospa(truth, estimate, params: OspaParams = OspaParams()) -> float:
    """OSPA distance between two finite sets of planar points.

    Cut-off Euclidean base distance, optimal assignment of the smaller
    set into the larger, cardinality penalty c per unmatched point.
    """
    X = np.asarray(truth, dtype=float).reshape(-1, 2) if len(truth) else np.zeros((0, 2))
    Y = np.asarray(estimate, dtype=float).reshape(-1, 2) if len(estimate) else np.zeros((0, 2))
    n, m = X.shape[0], Y.shape[0]
    if n == 0 and m == 0:
        return 0.0
    c, p = params.cutoff, params.order
    if n == 0 or m == 0:
        return c
    d = np.linalg.norm(X[:, None, :] - Y[None, :, :], axis=2)
    d = np.minimum(d, c) ** p
    rows, cols = linear_sum_assignment(d)
    cost = d[rows, cols].sum()
    return float(((c ** p) * abs(n - m) + cost) / max(n, m)) ** (1.0 / p)


def cardinality_series(estimates: Sequence[Sequence]) -> np.ndarray:
    """Per-scan estimate counts for one run."""
    return np.array([len(e) for e in estimates], dtype=float)


def mean_cardinality_series(per_run_counts: Sequence[np.ndarray]) -> np.ndarray:
    """Arithmetic mean of per-scan counts across Monte-Carlo runs."""
    stacked = np.stack([np.asarray(c, dtype=float) for c in per_run_counts])
    return stacked.mean(axis=0)
