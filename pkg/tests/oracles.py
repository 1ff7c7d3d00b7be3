"""Brute-force test oracles.

Discretized RFS set integrals, Monte-Carlo samplers, dense quadrature,
exhaustive assignment, finite differences, closed-form chi-square
inversion. Everything here is deliberately slow and independent of the
production code paths it checks; nothing in src/ may import this module.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from rfsfuse.densities import GmDensity, MppDensity


# ---------------------------------------------------------------------------
# Discretized set integrals
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DiscretizedSpace:
    """Midpoint-rule grid over a bounded 1-D or 2-D interval.

    `max_cardinality` truncates the cardinality series of set integrals;
    the truncation error for an MPP with rate lam is the Poisson tail
    P(N > max_cardinality), which callers must budget for.
    """

    lo: tuple[float, ...]
    hi: tuple[float, ...]
    n_points: int
    max_cardinality: int = 6

    def __post_init__(self):
        if len(self.lo) != len(self.hi) or len(self.lo) not in (1, 2):
            raise ValueError("space must be 1-D or 2-D")
        if self.n_points < 2 or self.max_cardinality < 0:
            raise ValueError("need n_points >= 2 and max_cardinality >= 0")

    @property
    def ndim(self) -> int:
        return len(self.lo)

    def points_and_weight(self) -> tuple[np.ndarray, float]:
        """Midpoint nodes (N, ndim) and the constant cell volume."""
        axes = []
        vol = 1.0
        for lo, hi in zip(self.lo, self.hi):
            step = (hi - lo) / self.n_points
            axes.append(lo + (np.arange(self.n_points) + 0.5) * step)
            vol *= step
        if self.ndim == 1:
            pts = axes[0][:, None]
        else:
            gx, gy = np.meshgrid(axes[0], axes[1], indexing="ij")
            pts = np.column_stack([gx.ravel(), gy.ravel()])
        return pts, vol

    def integrate(self, fn: Callable[[np.ndarray], np.ndarray]) -> float:
        pts, vol = self.points_and_weight()
        return float(np.sum(fn(pts)) * vol)


def poisson_truncation(lam: float, tail: float = 1e-8) -> int:
    """Smallest n with Poisson(lam) tail mass P(N > n) < tail."""
    term = math.exp(-lam)
    cdf = term
    n = 0
    while 1.0 - cdf >= tail:
        n += 1
        term *= lam / n
        cdf += term
        if n > 1000:
            raise RuntimeError("poisson truncation did not converge")
    return n


@dataclass(frozen=True)
class OracleMpp:
    """MPP with rate `lam` and location density `f` (callable on points)."""
    lam: float
    f: Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class OracleBernoulli:
    """Bernoulli with existence `r` and spatial density `f`."""
    r: float
    f: Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class OracleMb:
    """MB as a list of (r, f) Bernoulli parameter pairs."""
    components: tuple[OracleBernoulli, ...]


def set_integral(mod, space: DiscretizedSpace) -> float:
    """Numerical set integral sum_n (1/n!) int pi({x1..xn}) dx1..dxn.

    Spatial integrals are midpoint quadratures on the grid; the
    cardinality series is evaluated explicitly (mirroring the analytic
    expansion of each density family) and truncated at
    space.max_cardinality.
    """
    if isinstance(mod, OracleMpp):
        mass = space.integrate(mod.f)
        # sum_{n<=N} e^-lam (lam * mass)^n / n!
        total = 0.0
        term = math.exp(-mod.lam)
        for n in range(space.max_cardinality + 1):
            if n > 0:
                term *= mod.lam * mass / n
            total += term
        return total
    if isinstance(mod, OracleBernoulli):
        if space.max_cardinality < 1:
            return 1.0 - mod.r
        return (1.0 - mod.r) + mod.r * space.integrate(mod.f)
    if isinstance(mod, OracleMb):
        masses = [space.integrate(b.f) for b in mod.components]
        rs = [b.r for b in mod.components]
        pref = math.prod(1.0 - r for r in rs)
        total = 0.0
        idx = range(len(rs))
        for k in range(min(space.max_cardinality, len(rs)) + 1):
            for subset in itertools.combinations(idx, k):
                total += math.prod(rs[i] * masses[i] / (1.0 - rs[i]) for i in subset)
        return pref * total
    raise TypeError(f"unsupported oracle density type {type(mod)!r}")


def bernoulli_kld_grid(ra: float, fa, rb: float, fb,
                       space: DiscretizedSpace) -> float:
    """Set-integral KLD between two Bernoullis on a grid (empty + singleton)."""
    total = 0.0
    if ra < 1.0:
        total += (1.0 - ra) * math.log((1.0 - ra) / (1.0 - rb))
    if ra > 0.0:
        pts, vol = space.points_and_weight()
        va = np.asarray(fa(pts), dtype=float)
        vb = np.asarray(fb(pts), dtype=float)
        # both > 0: the grid must cover the joint effective support without
        # floating-point underflow (callers size the interval accordingly)
        mask = (va > 0.0) & (vb > 0.0)
        total += float(np.sum(ra * va[mask] * np.log(ra * va[mask] / (rb * vb[mask]))) * vol)
    return total


# ---------------------------------------------------------------------------
# Monte-Carlo samplers
# ---------------------------------------------------------------------------

def sample_gm(density: GmDensity, n: int, rng: np.random.Generator) -> np.ndarray:
    """n i.i.d. draws from the normalized mixture (component-grouped)."""
    w, m, P = density.stacked()
    dim = m.shape[1]
    if n == 0:
        return np.zeros((0, dim))
    probs = w / w.sum()
    picks = rng.choice(len(w), size=n, p=probs)
    out = np.empty((n, dim))
    for j in np.unique(picks):
        sel = picks == j
        L = np.linalg.cholesky(P[j] + 1e-12 * np.eye(dim))
        out[sel] = m[j] + rng.standard_normal((sel.sum(), dim)) @ L.T
    return out


def sample_mpp(density: MppDensity, rng: np.random.Generator) -> np.ndarray:
    """One realization: Poisson cardinality, i.i.d. locations from f."""
    lam = density.mean_cardinality
    n = int(rng.poisson(lam)) if lam > 0.0 else 0
    dim = density.intensity.dim if len(density.intensity) else 0
    if n == 0:
        return np.zeros((0, dim))
    return sample_gm(density.intensity, n, rng)


def sample_union_cardinalities(parts: Sequence[MppDensity], n_samples: int,
                               rng: np.random.Generator) -> np.ndarray:
    """Cardinalities of unions of independent per-part realizations."""
    total = np.zeros(n_samples, dtype=np.int64)
    for p in parts:
        total += rng.poisson(p.mean_cardinality, size=n_samples)
    return total


def mc_converted_covariance(r: float, theta: float, sigma_r: float,
                            sigma_theta: float, n: int,
                            rng: np.random.Generator) -> np.ndarray:
    """Sample covariance of polar-to-Cartesian converted noisy measurements.

    Uses the frame where the first coordinate lies along the angle-zero
    ray: (x, y) = (r cos theta, r sin theta).
    """
    rm = r + sigma_r * rng.standard_normal(n)
    tm = theta + sigma_theta * rng.standard_normal(n)
    xy = np.column_stack([rm * np.cos(tm), rm * np.sin(tm)])
    return np.cov(xy.T)


# ---------------------------------------------------------------------------
# Exhaustive assignment, quadrature, misc
# ---------------------------------------------------------------------------

def brute_force_assignment(costs: np.ndarray) -> float:
    """Exact minimum assignment cost over all permutations (n <= 6)."""
    c = np.asarray(costs, dtype=float)
    if c.ndim != 2 or c.shape[0] != c.shape[1]:
        raise ValueError("cost matrix must be square")
    n = c.shape[0]
    if n > 6:
        raise ValueError("brute force refused for n > 6")
    if n == 0:
        return 0.0
    best = math.inf
    for perm in itertools.permutations(range(n)):
        best = min(best, sum(c[i, perm[i]] for i in range(n)))
    return best


def quadrature_cell_mass(mean2: np.ndarray, cov2: np.ndarray,
                         cell_bounds: np.ndarray, n: int = 2048) -> float:
    """Dense midpoint quadrature of a 2-D Gaussian over a rectangle."""
    lo, hi = cell_bounds[:, 0], cell_bounds[:, 1]
    sx = (hi[0] - lo[0]) / n
    sy = (hi[1] - lo[1]) / n
    xs = lo[0] + (np.arange(n) + 0.5) * sx
    ys = lo[1] + (np.arange(n) + 0.5) * sy
    cinv = np.linalg.inv(cov2)
    norm = 1.0 / (2.0 * np.pi * np.sqrt(np.linalg.det(cov2)))
    total = 0.0
    for x0 in np.array_split(xs, 16):
        dx = x0[:, None] - mean2[0]
        dy = ys[None, :] - mean2[1]
        q = (cinv[0, 0] * dx ** 2
             + 2.0 * cinv[0, 1] * dx * dy
             + cinv[1, 1] * dy ** 2)
        total += float(np.sum(np.exp(-0.5 * q)))
    return total * norm * sx * sy


def finite_difference_jacobian(fn: Callable[[np.ndarray], np.ndarray],
                               x: np.ndarray, h: float = 1e-3) -> np.ndarray:
    """Central-difference Jacobian of fn at x."""
    x = np.asarray(x, dtype=float)
    f0 = np.asarray(fn(x))
    J = np.zeros((f0.shape[0], x.shape[0]))
    for k in range(x.shape[0]):
        xp, xm = x.copy(), x.copy()
        xp[k] += h
        xm[k] -= h
        J[:, k] = (np.asarray(fn(xp)) - np.asarray(fn(xm))) / (2.0 * h)
    return J


def chi2_quantile_closed_form(alpha: float, dof: int) -> float:
    """Invert the 2- or 4-dof chi-square CDF by bisection on closed forms."""
    if dof == 2:
        cdf = lambda x: 1.0 - math.exp(-x / 2.0)
    elif dof == 4:
        cdf = lambda x: 1.0 - math.exp(-x / 2.0) * (1.0 + x / 2.0)
    else:
        raise ValueError("closed forms provided for dof in {2, 4} only")
    lo, hi = 0.0, 1e3
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if cdf(mid) < alpha:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def gm_pdf_1d(weights, means, variances) -> Callable[[np.ndarray], np.ndarray]:
    """1-D Gaussian-mixture pdf as a callable over (N, 1) point arrays."""
    w = np.asarray(weights, dtype=float)
    m = np.asarray(means, dtype=float)
    v = np.asarray(variances, dtype=float)

    def fn(pts: np.ndarray) -> np.ndarray:
        x = np.asarray(pts, dtype=float).reshape(-1)
        out = np.zeros_like(x)
        for wj, mj, vj in zip(w, m, v):
            out += wj * np.exp(-0.5 * (x - mj) ** 2 / vj) / np.sqrt(2.0 * np.pi * vj)
        return out

    return fn
