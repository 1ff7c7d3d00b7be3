"""Core random-finite-set density types and their algebra.

Gaussian-mixture intensities, Poisson (MPP) and multi-Bernoulli (MB)
multi-object densities, axis-aligned space partitions, and the three
operations shared by both fusion paths: restriction of an MPP to a
partition cell, union of independent MPPs, and PHD extraction from an MB.

All types are immutable values; every operation is a pure function, so
instances can be shared freely across threads.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import ndtr

__all__ = [
    "GaussianComponent",
    "GmDensity",
    "MppDensity",
    "BernoulliComponent",
    "MbDensity",
    "SpacePartition",
    "mpp_restrict",
    "mpp_union",
    "phd_of_mb",
]

# Position coordinates occupy the first two state dimensions.
POSITION_DIMS = slice(0, 2)


def _as_matrix(a) -> np.ndarray:
    m = np.array(a, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"covariance must be a square matrix, got shape {m.shape}")
    return m


@dataclass(frozen=True)
class GaussianComponent:
    """One weighted Gaussian: nonnegative mass, mean vector, covariance.

    The covariance is symmetrized on construction, (P + P^T)/2, to bound
    floating-point drift through repeated updates. Positive
    semi-definiteness is checked by :meth:`validate` (kept out of the hot
    path).
    """

    weight: float
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        w = float(self.weight)
        if not np.isfinite(w) or w < 0.0:
            raise ValueError(f"component weight must be finite and >= 0, got {w}")
        mean = np.asarray(self.mean, dtype=float).reshape(-1)
        cov = _as_matrix(self.cov)
        if cov.shape[0] != mean.shape[0]:
            raise ValueError("mean/covariance dimension mismatch")
        cov = 0.5 * (cov + cov.T)
        object.__setattr__(self, "weight", w)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    def validate(self) -> None:
        """Strict invariant check: symmetry and PSD up to -1e-9 * trace."""
        asym = np.max(np.abs(self.cov - self.cov.T))
        scale = max(np.max(np.abs(self.cov)), 1.0)
        if asym > 1e-10 * scale:
            raise ValueError("covariance is not symmetric")
        eig = np.linalg.eigvalsh(self.cov)
        if eig.min() < -1e-9 * max(np.trace(self.cov), 1.0):
            raise ValueError(f"covariance is not PSD (min eigenvalue {eig.min()})")


@dataclass(frozen=True)
class GmDensity:
    """A finite weighted sum of Gaussian components.

    Used both as an intensity function (arbitrary total mass) and, when
    normalized to unit mass, as a spatial location density.
    """

    components: tuple[GaussianComponent, ...] = ()

    def __post_init__(self):
        comps = tuple(self.components)
        if comps:
            d = comps[0].dim
            for c in comps:
                if c.dim != d:
                    raise ValueError("mixed component dimensions in one mixture")
        object.__setattr__(self, "components", comps)

    def __len__(self) -> int:
        return len(self.components)

    @property
    def dim(self) -> int:
        if not self.components:
            raise ValueError("empty mixture has no dimension")
        return self.components[0].dim

    @property
    def total_mass(self) -> float:
        return float(sum(c.weight for c in self.components))

    def stacked(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Return (weights (J,), means (J,d), covs (J,d,d)) as arrays."""
        if not self.components:
            return np.zeros(0), np.zeros((0, 0)), np.zeros((0, 0, 0))
        w = np.array([c.weight for c in self.components])
        m = np.stack([c.mean for c in self.components])
        P = np.stack([c.cov for c in self.components])
        return w, m, P

    @staticmethod
    def from_stacked(w: np.ndarray, m: np.ndarray, P: np.ndarray) -> "GmDensity":
        return GmDensity(tuple(
            GaussianComponent(float(w[j]), m[j], P[j]) for j in range(len(w))
        ))

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        """Mixture value sum_j w_j N(x; m_j, P_j) at each row of `points`."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        out = np.zeros(pts.shape[0])
        for c in self.components:
            d = c.dim
            diff = pts - c.mean
            cinv = np.linalg.inv(c.cov)
            q = np.einsum("ni,ij,nj->n", diff, cinv, diff)
            norm = 1.0 / np.sqrt((2.0 * np.pi) ** d * np.linalg.det(c.cov))
            out += c.weight * norm * np.exp(-0.5 * q)
        return out

    def position_marginal(self) -> "GmDensity":
        """Marginalize each component onto the position coordinates."""
        return GmDensity(tuple(
            GaussianComponent(c.weight, c.mean[POSITION_DIMS],
                              c.cov[POSITION_DIMS, POSITION_DIMS])
            for c in self.components
        ))

    def scaled(self, factor: float) -> "GmDensity":
        return GmDensity(tuple(
            GaussianComponent(c.weight * factor, c.mean, c.cov)
            for c in self.components
        ))

    def normalized(self) -> "GmDensity":
        mass = self.total_mass
        if mass <= 0.0:
            raise ValueError("cannot normalize a mixture with zero mass")
        return self.scaled(1.0 / mass)

    def moment_match(self) -> tuple[np.ndarray, np.ndarray]:
        """Collapse to a single (mean, covariance) preserving both moments."""
        w, m, P = self.stacked()
        mass = w.sum()
        if mass <= 0.0:
            raise ValueError("cannot moment-match a mixture with zero mass")
        wn = w / mass
        mean = wn @ m
        diff = m - mean
        cov = np.einsum("j,jab->ab", wn, P) + np.einsum("j,ja,jb->ab", wn, diff, diff)
        return mean, 0.5 * (cov + cov.T)


@dataclass(frozen=True)
class MppDensity:
    """Poisson multi-object density, fully characterized by its intensity.

    Mean cardinality is the total mass of the intensity; the location
    density is the intensity normalized to unit mass.
    """

    intensity: GmDensity

    @property
    def mean_cardinality(self) -> float:
        return self.intensity.total_mass


@dataclass(frozen=True)
class BernoulliComponent:
    """Existence probability plus a unit-mass spatial density."""

    existence: float
    spatial: GmDensity

    def __post_init__(self):
        r = float(self.existence)
        if not 0.0 <= r <= 1.0:
            raise ValueError(f"existence probability must be in [0,1], got {r}")
        mass = self.spatial.total_mass
        if abs(mass - 1.0) > 1e-9:
            raise ValueError(f"spatial density mass must be 1, got {mass}")
        object.__setattr__(self, "existence", r)


@dataclass(frozen=True)
class MbDensity:
    """Multi-Bernoulli density: a list of independent Bernoulli components."""

    components: tuple[BernoulliComponent, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "components", tuple(self.components))

    def __len__(self) -> int:
        return len(self.components)

    @property
    def expected_cardinality(self) -> float:
        return float(sum(b.existence for b in self.components))


@dataclass(frozen=True)
class SpacePartition:
    """Axis-aligned rectangular grid over the position coordinates.

    Cells tile `bounds` exactly and are indexed flat as ix * dims[1] + iy
    (x-major). Cell m of the state space is cell_m x R^2 over velocities.
    """

    bounds: np.ndarray        # (2, 2): [[xmin, xmax], [ymin, ymax]]
    cell_size: np.ndarray     # (2,)
    dims: tuple[int, int]

    def __post_init__(self):
        bounds = np.array(self.bounds, dtype=float).reshape(2, 2)
        cell = np.array(self.cell_size, dtype=float).reshape(2)
        dims = (int(self.dims[0]), int(self.dims[1]))
        if np.any(cell <= 0.0) or dims[0] < 1 or dims[1] < 1:
            raise ValueError("cell sizes must be positive and dims >= 1")
        extent = bounds[:, 1] - bounds[:, 0]
        if np.any(extent <= 0.0):
            raise ValueError("degenerate partition bounds")
        tiled = cell * np.array(dims)
        if np.any(np.abs(tiled - extent) > 1e-9 * np.maximum(extent, 1.0)):
            raise ValueError("cells must tile the bounds exactly")
        object.__setattr__(self, "bounds", bounds)
        object.__setattr__(self, "cell_size", cell)
        object.__setattr__(self, "dims", dims)

    @staticmethod
    def regular(bounds, dims: tuple[int, int]) -> "SpacePartition":
        """Partition `bounds` into dims[0] x dims[1] equal cells."""
        b = np.array(bounds, dtype=float).reshape(2, 2)
        d = (int(dims[0]), int(dims[1]))
        cell = (b[:, 1] - b[:, 0]) / np.array(d)
        return SpacePartition(b, cell, d)

    @property
    def n_cells(self) -> int:
        return self.dims[0] * self.dims[1]

    def cell_xy(self, index: int) -> tuple[int, int]:
        if not 0 <= index < self.n_cells:
            raise IndexError(f"cell index {index} out of range (0..{self.n_cells - 1})")
        return index // self.dims[1], index % self.dims[1]

    def cell_bounds(self, index: int) -> np.ndarray:
        """(2, 2) array [[xlo, xhi], [ylo, yhi]] of the cell."""
        ix, iy = self.cell_xy(index)
        lo = self.bounds[:, 0] + self.cell_size * np.array([ix, iy])
        hi = lo + self.cell_size
        # Use exact outer bounds on the last cells so the tiling is closed.
        if ix == self.dims[0] - 1:
            hi[0] = self.bounds[0, 1]
        if iy == self.dims[1] - 1:
            hi[1] = self.bounds[1, 1]
        return np.stack([lo, hi], axis=1)

    def cell_center(self, index: int) -> np.ndarray:
        cb = self.cell_bounds(index)
        return 0.5 * (cb[:, 0] + cb[:, 1])

    def centers(self) -> np.ndarray:
        """(n_cells, 2) cell centers in flat (x-major) order."""
        ex = self.bounds[:, 0]
        cx = ex[0] + (np.arange(self.dims[0]) + 0.5) * self.cell_size[0]
        cy = ex[1] + (np.arange(self.dims[1]) + 0.5) * self.cell_size[1]
        gx, gy = np.meshgrid(cx, cy, indexing="ij")
        return np.column_stack([gx.ravel(), gy.ravel()])

    def edges(self) -> tuple[np.ndarray, np.ndarray]:
        """Cell edge coordinates per axis, lengths dims+1."""
        ex = self.bounds[0, 0] + np.arange(self.dims[0] + 1) * self.cell_size[0]
        ey = self.bounds[1, 0] + np.arange(self.dims[1] + 1) * self.cell_size[1]
        ex[-1] = self.bounds[0, 1]
        ey[-1] = self.bounds[1, 1]
        return ex, ey

    def locate(self, position) -> int:
        """Flat index of the cell containing `position` (first two coords).

        Points exactly on a shared interior edge belong to the lower-index
        cell; points outside the bounds clamp to the nearest boundary cell.
        """
        p = np.asarray(position, dtype=float).reshape(-1)[:2]
        idx = []
        for axis in range(2):
            t = (p[axis] - self.bounds[axis, 0]) / self.cell_size[axis]
            i = int(np.floor(t))
            if i > 0 and t == i:
                i -= 1  # interior shared edge -> lower cell
            idx.append(min(max(i, 0), self.dims[axis] - 1))
        return idx[0] * self.dims[1] + idx[1]


def component_cell_masses(comp: GaussianComponent,
                          partition: SpacePartition) -> np.ndarray:
    """Per-cell probability masses of one component's position marginal.

    Computed as the product of two 1-D Gaussian CDF differences over the
    marginal standard deviations (exact for axis-aligned cells when the
    position block is diagonal; the x-y cross term is ignored by design).
    The masses sum to the component's in-bounds marginal-product mass, so
    any mass leaking outside the partition bounds is simply absent.
    """
    mx, my = comp.mean[0], comp.mean[1]
    sx = np.sqrt(max(comp.cov[0, 0], 0.0))
    sy = np.sqrt(max(comp.cov[1, 1], 0.0))
    ex, ey = partition.edges()
    fx = ndtr((ex - mx) / sx) if sx > 0 else (ex >= mx).astype(float)
    fy = ndtr((ey - my) / sy) if sy > 0 else (ey >= my).astype(float)
    return np.outer(np.diff(fx), np.diff(fy)).ravel()


def mpp_restrict(density: MppDensity, partition: SpacePartition,
                 cell_index: int) -> MppDensity:
    """Restrict an MPP to one partition cell.

    The restricted mean cardinality is lambda * p_m with p_m the cell's
    probability mass under the location density; each Gaussian component
    contributes its own cell-mass fraction as a reweighted copy of the
    full component (not a truncated Gaussian).
    """
    if not 0 <= int(cell_index) < partition.n_cells:
        raise IndexError(
            f"cell index {cell_index} out of range (0..{partition.n_cells - 1})")
    cb = partition.cell_bounds(int(cell_index))
    comps = []
    for c in density.intensity.components:
        sx = np.sqrt(max(c.cov[0, 0], 0.0))
        sy = np.sqrt(max(c.cov[1, 1], 0.0))
        if sx > 0:
            px = ndtr((cb[0, 1] - c.mean[0]) / sx) - ndtr((cb[0, 0] - c.mean[0]) / sx)
        else:
            px = float(cb[0, 0] <= c.mean[0] <= cb[0, 1])
        if sy > 0:
            py = ndtr((cb[1, 1] - c.mean[1]) / sy) - ndtr((cb[1, 0] - c.mean[1]) / sy)
        else:
            py = float(cb[1, 0] <= c.mean[1] <= cb[1, 1])
        comps.append(GaussianComponent(c.weight * px * py, c.mean, c.cov))
    return MppDensity(GmDensity(tuple(comps)))


def mpp_union(parts: Sequence[MppDensity]) -> MppDensity:
    """Union of independent MPPs: intensities add, components concatenate."""
    parts = list(parts)
    if not parts:
        raise ValueError("mpp_union requires a non-empty list of densities")
    comps: list[GaussianComponent] = []
    for p in parts:
        comps.extend(p.intensity.components)
    return MppDensity(GmDensity(tuple(comps)))


def phd_of_mb(density: MbDensity) -> GmDensity:
    """First-order moment of an MB density: sum_b r_b * f_b(x)."""
    comps: list[GaussianComponent] = []
    for b in density.components:
        for c in b.spatial.components:
            comps.append(GaussianComponent(b.existence * c.weight, c.mean, c.cov))
    return GmDensity(tuple(comps))
