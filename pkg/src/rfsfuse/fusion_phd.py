"""Fusion-center rules for Poisson (PHD) densities.

Space-varying-weight fusion of per-sensor intensities in Gaussian-mixture
form: each component is reweighted by its sensor's weight looked up at the
component mean (the mean-evaluation approximation that keeps the result a
plain Gaussian mixture), plus the homogeneous scalar-weight arithmetic
average as the baseline. An exact restrict/fuse/union path over the
partition cells is kept behind a flag for test oracles.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .densities import (
    GaussianComponent,
    GmDensity,
    MppDensity,
    SpacePartition,
    component_cell_masses,
    mpp_union,
)
from .weights import WeightMap, lookup_weight

__all__ = ["FusionInputPhd", "hmphd_fuse", "waa_fuse_phd", "fused_cardinality"]


@dataclass(frozen=True)
class FusionInputPhd:
    """Per-sensor Poisson densities plus either a weight map or scalars."""

    densities: tuple[MppDensity, ...]
    weight_map: WeightMap | None = None
    scalar_weights: np.ndarray | None = None

    def __post_init__(self):
        dens = tuple(self.densities)
        if not dens:
            raise ValueError("need at least one sensor density")
        if (self.weight_map is None) == (self.scalar_weights is None):
            raise ValueError("provide exactly one of weight_map / scalar_weights")
        if self.scalar_weights is not None:
            w = np.asarray(self.scalar_weights, dtype=float)
            if w.shape != (len(dens),):
                raise ValueError("one scalar weight per sensor required")
            if abs(w.sum() - 1.0) > 1e-9:
                raise ValueError(f"scalar weights must sum to 1, got {w.sum()}")
            object.__setattr__(self, "scalar_weights", w)
        elif self.weight_map.n_sensors != len(dens):
            raise ValueError("weight map sensor count mismatch")
        object.__setattr__(self, "densities", dens)


def waa_fuse_phd(densities, weights) -> MppDensity:
    """Homogeneous arithmetic average: intensity sum_i w_i * nu_i."""
    dens = tuple(densities)
    w = np.asarray(weights, dtype=float)
    if w.shape != (len(dens),):
        raise ValueError("one weight per sensor required")
    if abs(w.sum() - 1.0) > 1e-9:
        raise ValueError(f"weights must sum to 1, got {w.sum()}")
    comps = []
    for wi, d in zip(w, dens):
        for c in d.intensity.components:
            comps.append(GaussianComponent(wi * c.weight, c.mean, c.cov))
    return MppDensity(GmDensity(tuple(comps)))


def hmphd_fuse(fusion_input: FusionInputPhd, exact: bool = False) -> MppDensity:
    """Space-varying-weight fusion of per-sensor Poisson densities.

    Production path: every Gaussian component is reweighted by its
    sensor's weight evaluated at the component mean. With scalar weights
    this reduces exactly to `waa_fuse_phd`. The `exact` flag instead
    restricts each density to every partition cell, fuses per cell with
    that cell's weights, and unions the cells (test oracle only; requires
    a weight map).
    """
    dens = fusion_input.densities
    if fusion_input.scalar_weights is not None:
        return waa_fuse_phd(dens, fusion_input.scalar_weights)
    wmap = fusion_input.weight_map
    if exact:
        return _exact_cellwise_fuse(dens, wmap)
    comps = []
    for i, d in enumerate(dens):
        for c in d.intensity.components:
            omega = lookup_weight(wmap, i, c.mean)
            comps.append(GaussianComponent(omega * c.weight, c.mean, c.cov))
    return MppDensity(GmDensity(tuple(comps)))


def _exact_cellwise_fuse(densities, wmap: WeightMap) -> MppDensity:
    """Restrict each density to every cell, fuse per cell, union the cells."""
    part: SpacePartition = wmap.partition
    per_cell: list[list[GaussianComponent]] = [[] for _ in range(part.n_cells)]
    for i, d in enumerate(densities):
        for c in d.intensity.components:
            masses = component_cell_masses(c, part)
            for m in range(part.n_cells):
                per_cell[m].append(GaussianComponent(
                    wmap.weights[i, m] * c.weight * masses[m], c.mean, c.cov))
    return mpp_union([MppDensity(GmDensity(tuple(comps))) for comps in per_cell])


def fused_cardinality(fusion_input: FusionInputPhd) -> float:
    """Fused mean cardinality sum_i lambda_i * mu_i.

    mu_i = sum_m w_{i,m} p_{i,m} with the cell masses p_{i,m} taken under
    the same approximation as the mixture fusion (each component's mass
    assigned to the cell containing its mean), so the value matches the
    total mass of `hmphd_fuse` exactly.
    """
    dens = fusion_input.densities
    if fusion_input.scalar_weights is not None:
        return float(sum(w * d.mean_cardinality
                         for w, d in zip(fusion_input.scalar_weights, dens)))
    wmap = fusion_input.weight_map
    total = 0.0
    for i, d in enumerate(dens):
        for c in d.intensity.components:
            total += lookup_weight(wmap, i, c.mean) * c.weight
    return float(total)
