"""Fusion-center rules for multi-Bernoulli densities.

Object-oriented factorization (one Bernoulli per hypothesized object),
KLD-driven clustering of components across sensors via union-find,
per-cluster weighted arithmetic averaging, and reconstruction of the
fused MB density. Heterogeneous weights come from the precomputed weight
map looked up at each member's spatial-density mode; scalar weights give
the homogeneous baseline that preserves the first-order moment of the
direct arithmetic average.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.stats import chi2

from .densities import BernoulliComponent, GaussianComponent, GmDensity, MbDensity
from .models import SensorModel
from .weights import EufParams, WeightMap, euf, lookup_weight, normalize_weights

__all__ = [
    "MbFusionParams",
    "Clustering",
    "HpdEllipsoid",
    "UnionFind",
    "bernoulli_kld",
    "gaussian_kld",
    "hpd_region",
    "check_c2",
    "cluster_components",
    "bernoulli_waa_fuse",
    "hmmb_fuse",
]

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MbFusionParams:
    """Clustering threshold, HPD credibility, and consistency tolerance."""

    gamma: float = 10.0
    alpha: float = 0.95
    delta_epsilon: float = 1e6
    symmetric_kld: bool = False

    def __post_init__(self):
        if self.gamma <= 0.0:
            raise ValueError("gamma must be > 0")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must be in (0,1)")
        if self.delta_epsilon < 0.0:
            raise ValueError("delta_epsilon must be >= 0")


@dataclass(frozen=True)
class Clustering:
    """Partition of (sensor, component) pairs into per-object clusters.

    Each cluster holds at most one component per sensor (singleton or
    absent), and every input pair appears in exactly one cluster.
    """

    clusters: tuple[tuple[tuple[int, int], ...], ...]

    def __post_init__(self):
        seen = set()
        for cl in self.clusters:
            if not cl:
                raise ValueError("clusters must be non-empty")
            sensors = [i for i, _ in cl]
            if len(set(sensors)) != len(sensors):
                raise ValueError("a cluster may hold at most one component per sensor")
            for pair in cl:
                if pair in seen:
                    raise ValueError(f"pair {pair} appears in more than one cluster")
                seen.add(pair)
        object.__setattr__(self, "clusters", tuple(tuple(cl) for cl in self.clusters))


class UnionFind:
    """Disjoint sets over 0..n-1 with union by rank and path compression."""

    def __init__(self, n: int):
        self.parent = list(range(n))
        self.rank = [0] * n

    def find(self, a: int) -> int:
        root = a
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[a] != root:
            self.parent[a], a = root, self.parent[a]
        return root

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return
        if self.rank[ra] < self.rank[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        if self.rank[ra] == self.rank[rb]:
            self.rank[ra] += 1


def gaussian_kld(m0, P0, m1, P1) -> float:
    """KL divergence between two Gaussians N(m0,P0) || N(m1,P1)."""
    m0 = np.asarray(m0, float)
    m1 = np.asarray(m1, float)
    d = m0.shape[0]
    P1inv = np.linalg.inv(P1)
    diff = m1 - m0
    _, ld0 = np.linalg.slogdet(P0)
    _, ld1 = np.linalg.slogdet(P1)
    return 0.5 * float(np.trace(P1inv @ P0) + diff @ P1inv @ diff - d + ld1 - ld0)


def bernoulli_kld(a: BernoulliComponent, b: BernoulliComponent) -> float:
    """KLD between Bernoulli densities.

    (1-ra) log((1-ra)/(1-rb)) + ra log(ra/rb) + ra * KL(fa || fb), with
    the spatial KL computed between single-Gaussian moment matches of the
    mixtures (exact when both are single Gaussians). rb in {0, 1} with a
    mismatched ra gives +inf.
    """
    ra, rb = a.existence, b.existence
    total = 0.0
    if ra < 1.0:
        if rb >= 1.0:
            return math.inf
        total += (1.0 - ra) * math.log((1.0 - ra) / (1.0 - rb))
    if ra > 0.0:
        if rb <= 0.0:
            return math.inf
        total += ra * math.log(ra / rb)
        total += ra * gaussian_kld(*a.spatial.moment_match(), *b.spatial.moment_match())
    return total


@dataclass(frozen=True)
class HpdEllipsoid:
    """Credible region {x : (x-center)^T shape^-1 (x-center) <= radius2}."""

    center: np.ndarray
    shape: np.ndarray
    radius2: float


def hpd_region(density: GmDensity, alpha: float) -> HpdEllipsoid:
    """Highest-posterior-density ellipsoid of the dominant component.

    For a single Gaussian the squared radius is the chi-square quantile
    at `alpha` for the density's dimension, so coverage is exactly alpha.
    """
    if len(density) == 0:
        raise ValueError("empty density has no HPD region")
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must be in (0,1)")
    dominant = max(density.components, key=lambda c: c.weight)
    r2 = float(chi2.ppf(alpha, dominant.dim))
    return HpdEllipsoid(dominant.mean.copy(), dominant.cov.copy(), r2)


_N_BOUNDARY_SAMPLES = 16


def check_c2(component: BernoulliComponent, sensor: SensorModel,
             params: MbFusionParams, euf_params: EufParams) -> bool:
    """Information-consistency check over the component's HPD region.

    Samples the EUF at the center plus 16 boundary points of the
    position-marginal HPD ellipse; true iff max - min <= delta_epsilon.
    A failure logs a warning (callers keep fusing regardless).
    """
    marginal = component.spatial.position_marginal()
    region = hpd_region(marginal, params.alpha)
    L = np.linalg.cholesky(region.shape + 1e-12 * np.eye(2))
    angles = 2.0 * np.pi * np.arange(_N_BOUNDARY_SAMPLES) / _N_BOUNDARY_SAMPLES
    offsets = np.sqrt(region.radius2) * (L @ np.stack([np.cos(angles), np.sin(angles)]))
    points = [region.center] + [region.center + offsets[:, k]
                                for k in range(_N_BOUNDARY_SAMPLES)]
    values = [euf(np.concatenate([p, np.zeros(2)]), sensor, euf_params)
              for p in points]
    finite = [v for v in values if not math.isinf(v)]
    if not finite:
        return True  # uniformly out of view: EUF is locally constant (inf)
    if len(finite) < len(values):
        ok = False  # jump to infinity across the region
    else:
        ok = max(finite) - min(finite) <= params.delta_epsilon
    if not ok:
        logger.warning(
            "information consistency violated over an HPD region "
            "(EUF spread exceeds delta_epsilon); fusing anyway")
    return ok


def _pairwise_kld(nodes: Sequence[tuple[int, BernoulliComponent]]) -> np.ndarray:
    """Directed KLD matrix over the flattened (sensor, component) nodes.

    Entries for same-sensor pairs and the diagonal are +inf so they can
    never link; existence values of 0 or 1 propagate +inf per the
    Bernoulli KLD conventions.
    """
    n = len(nodes)
    rs = np.array([b.existence for _, b in nodes])
    mm = [b.spatial.moment_match() for _, b in nodes]
    means = np.stack([m for m, _ in mm])
    covs = np.stack([P for _, P in mm])
    d = means.shape[1]
    invs = np.linalg.inv(covs)
    lds = np.linalg.slogdet(covs)[1]
    # trace term: tr(Pb^-1 Pa) for all (a, b)
    tr = np.einsum("bij,aji->ab", invs, covs)
    diff = means[None, :, :] - means[:, None, :]        # (a, b, d)
    quad = np.einsum("abi,bij,abj->ab", diff, invs, diff)
    spatial = 0.5 * (tr + quad - d + lds[None, :] - lds[:, None])
    with np.errstate(divide="ignore", invalid="ignore"):
        ra = rs[:, None]
        rb = rs[None, :]
        miss = np.where(ra < 1.0,
                        (1.0 - ra) * (np.log(1.0 - ra) - np.log(1.0 - rb)), 0.0)
        hit = np.where(ra > 0.0, ra * (np.log(ra) - np.log(rb)) + ra * spatial, 0.0)
        kld = miss + hit
    kld = np.where(np.isnan(kld), np.inf, kld)
    sensors = np.array([i for i, _ in nodes])
    kld[sensors[:, None] == sensors[None, :]] = np.inf
    return kld


def cluster_components(densities: Sequence[MbDensity],
                       params: MbFusionParams) -> Clustering:
    """Group Bernoulli components across sensors into per-object clusters.

    Union-find links cross-sensor pairs whose directed KLD is within
    gamma (or whose symmetrized KLD is, when configured). If a sensor
    ends up with several components in one cluster, only the one with the
    smallest summed KLD to the cluster's other-sensor members is
    retained; the rest become singleton clusters.
    """
    nodes: list[tuple[int, int, BernoulliComponent]] = []
    for i, d in enumerate(densities):
        for b_idx, b in enumerate(d.components):
            nodes.append((i, b_idx, b))
    n = len(nodes)
    if n == 0:
        return Clustering(())
    kld = _pairwise_kld([(i, b) for i, _, b in nodes])
    link = kld <= params.gamma
    if params.symmetric_kld:
        link = link & link.T
    uf = UnionFind(n)
    for a in range(n):
        for b in np.nonzero(link[a])[0]:
            uf.union(a, int(b))
    groups: dict[int, list[int]] = {}
    for a in range(n):
        groups.setdefault(uf.find(a), []).append(a)

    clusters: list[tuple[tuple[int, int], ...]] = []
    for members in groups.values():
        by_sensor: dict[int, list[int]] = {}
        for a in members:
            by_sensor.setdefault(nodes[a][0], []).append(a)
        kept: list[int] = []
        evicted: list[int] = []
        for sensor_idx, cands in sorted(by_sensor.items()):
            if len(cands) == 1:
                kept.append(cands[0])
                continue
            others = [a for a in members if nodes[a][0] != sensor_idx]
            scores = [(sum(kld[a, o] for o in others), nodes[a][1], a)
                      for a in cands]
            best = min(scores)[2]
            kept.append(best)
            evicted.extend(a for a in cands if a != best)
        clusters.append(tuple(sorted((nodes[a][0], nodes[a][1]) for a in kept)))
        clusters.extend(((nodes[a][0], nodes[a][1]),) for a in sorted(evicted))
    clusters.sort()
    return Clustering(tuple(clusters))


def bernoulli_waa_fuse(cluster: Sequence[tuple[BernoulliComponent, float]],
                       ) -> tuple[BernoulliComponent, bool]:
    """Weighted arithmetic average of Bernoulli components.

    r_bar = sum w r; the fused spatial density is the mixture of all
    members' components with weights w * r * alpha / r_bar (zero-mass
    components omitted). Weights must sum to 1. When r_bar = 0 the
    existence is 0, the spatial density is the unweighted normalized
    mixture of the members, and the returned flag is True.
    """
    members = list(cluster)
    if not members:
        raise ValueError("cluster must be non-empty")
    w = np.array([wi for _, wi in members], dtype=float)
    if abs(w.sum() - 1.0) > 1e-9:
        raise ValueError(f"fusion weights must sum to 1, got {w.sum()}")
    if np.any(w < 0.0):
        raise ValueError("fusion weights must be >= 0")
    r_bar = float(sum(wi * b.existence for b, wi in members))
    if r_bar <= 0.0:
        mix = GmDensity(tuple(
            c for b, _ in members for c in b.spatial.components))
        return BernoulliComponent(0.0, mix.normalized()), True
    comps = []
    for b, wi in members:
        for c in b.spatial.components:
            weight = wi * b.existence * c.weight / r_bar
            if weight > 0.0:
                comps.append(GaussianComponent(weight, c.mean, c.cov))
    return BernoulliComponent(min(r_bar, 1.0), GmDensity(tuple(comps))), False


def _mode_of(b: BernoulliComponent) -> np.ndarray:
    """Mode of the spatial density, approximated by the heaviest Gaussian."""
    comps = b.spatial.components
    best = max(range(len(comps)), key=lambda k: (comps[k].weight, -k))
    return comps[best].mean


def hmmb_fuse(densities: Sequence[MbDensity],
              weight_map: WeightMap | None,
              params: MbFusionParams,
              euf_params: EufParams | None = None,
              sensors: Sequence[SensorModel] | None = None,
              scalar_weights=None,
              check_consistency: bool = False,
              return_details: bool = False):
    """Cluster Bernoulli components across sensors and fuse each cluster.

    Heterogeneous mode (weight_map given): each member's raw weight is the
    map value of its own sensor at the member's spatial mode; the raw
    weights are normalized over the cluster's members (absent sensors
    contribute zero confidence). Homogeneous mode (scalar_weights given):
    members keep their sensor's fixed weight and absent sensors enter as
    zero-existence placeholders, which preserves the first-order moment of
    the direct arithmetic average.
    """
    densities = list(densities)
    if (weight_map is None) == (scalar_weights is None):
        raise ValueError("provide exactly one of weight_map / scalar_weights")
    if scalar_weights is not None:
        scalar_weights = np.asarray(scalar_weights, dtype=float)
        if scalar_weights.shape != (len(densities),):
            raise ValueError("one scalar weight per sensor required")
    if check_consistency and sensors is not None and euf_params is not None:
        for i, d in enumerate(densities):
            for b in d.components:
                check_c2(b, sensors[i], params, euf_params)
    clustering = cluster_components(densities, params)
    fused = []
    details = []
    for cl in clustering.clusters:
        members = [(densities[i].components[b], i) for i, b in cl]
        if scalar_weights is not None:
            member_weights = [float(scalar_weights[i]) for _, i in members]
            pairs = list(zip([b for b, _ in members], member_weights))
            present = {i for _, i in members}
            placeholder_spatial = members[0][0].spatial
            pairs += [(BernoulliComponent(0.0, placeholder_spatial),
                       float(scalar_weights[i]))
                      for i in range(len(densities)) if i not in present]
        else:
            raw = np.array([lookup_weight(weight_map, i, _mode_of(b))
                            for b, i in members])
            norm, flagged = normalize_weights(raw)
            if flagged:
                # every member carries zero information confidence (e.g. a
                # stale track coasting outside its own sensor's FoV): the
                # cluster asserts no object
                logger.debug("zero-confidence cluster fused to existence 0")
                mix = GmDensity(tuple(
                    c for b, _ in members for c in b.spatial.components))
                fused.append(BernoulliComponent(0.0, mix.normalized()))
                details.append({"members": [[int(i), int(b)] for i, b in cl],
                                "weights": [0.0] * len(members)})
                continue
            member_weights = [float(v) for v in norm]
            pairs = [(b, member_weights[k]) for k, (b, _) in enumerate(members)]
        comp, _ = bernoulli_waa_fuse(pairs)
        fused.append(comp)
        details.append({"members": [[int(i), int(b)] for i, b in cl],
                        "weights": member_weights})
    result = MbDensity(tuple(fused))
    if return_details:
        return result, details
    return result
