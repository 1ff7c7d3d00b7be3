"""Local GM-PHD and GM-MB filter recursions.

Prediction, measurement update with extended-Kalman linearization of the
range-angle model, mixture reduction, and state extraction. These produce
the per-sensor multi-object densities consumed by the fusion center.

The update uses the state-dependent detection probability evaluated at
component means, uniform clutter over the measurement space, and a
Mahalanobis gate (GATE_MAHALANOBIS2) that skips component/measurement
pairs with negligible likelihood.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .densities import (
    BernoulliComponent,
    GaussianComponent,
    GmDensity,
    MbDensity,
    MppDensity,
)
from .models import (
    MotionModel,
    SensorModel,
    detection_probabilities,
    wrap_angle,
)

__all__ = [
    "BirthModel",
    "FilterParams",
    "GATE_MAHALANOBIS2",
    "clutter_density",
    "phd_predict",
    "phd_update",
    "mb_predict",
    "mb_update",
    "prune_merge",
    "reduce_mb",
    "extract_phd_estimates",
    "extract_mb_estimates",
]

# Measurement/component pairs beyond this Mahalanobis^2 are treated as
# zero-likelihood (a documented truncation; see the configuration docs).
GATE_MAHALANOBIS2 = 25.0

# Existence probabilities are capped strictly below 1: the r/(1-r)
# factors of the MB update must stay finite, and a component at r = 1
# could never be killed by missed detections (its legacy update
# r(1-rho)/(1-r*rho) fixes r = 1), leaving immortal stale tracks.
_R_CAP = 0.995


@dataclass(frozen=True)
class BirthModel:
    """Static per-scan birth: a PHD mixture and its MB counterpart."""

    phd: GmDensity = GmDensity(())
    mb: tuple[BernoulliComponent, ...] = ()

    @property
    def phd_mass(self) -> float:
        return self.phd.total_mass


@dataclass(frozen=True)
class FilterParams:
    """Mixture-reduction and extraction thresholds.

    `max_components` caps the PHD mixture (or the per-Bernoulli mixture
    for MB-filter parameter sets). `extraction_threshold` is carried for
    the config schema; the expected-cardinality MB extractor specified
    here does not consult it.
    """

    prune_threshold: float = 1e-5
    merge_threshold: float = 4.0
    max_components: int = 100
    existence_prune: float = 1e-3
    extraction_threshold: float = 0.5

    def __post_init__(self):
        if min(self.prune_threshold, self.merge_threshold,
               self.existence_prune, self.extraction_threshold) < 0.0:
            raise ValueError("thresholds must be >= 0")
        if self.max_components < 1:
            raise ValueError("max_components must be >= 1")


def clutter_density(sensor: SensorModel) -> float:
    """Uniform clutter intensity per unit of (rad x m) measurement space."""
    return sensor.clutter_rate / (2.0 * np.pi * sensor.fov_max)


# ---------------------------------------------------------------------------
# Shared EKF machinery
# ---------------------------------------------------------------------------

def _ekf_precompute(means: np.ndarray, covs: np.ndarray, sensor: SensorModel):
    """Per-component EKF quantities for the range-angle model.

    Returns predicted measurements, innovation covariances (with closed
    2x2 inverses/determinants), gains and updated covariances, vectorized
    over the J components.
    """
    dx = means[:, 0] - sensor.position[0]
    dy = means[:, 1] - sensor.position[1]
    r2 = dx * dx + dy * dy
    if np.any(r2 == 0.0):
        raise ValueError("component mean coincides with the sensor position")
    r = np.sqrt(r2)
    eta = np.column_stack([np.arctan2(dx, dy), r])
    J = means.shape[0]
    H = np.zeros((J, 2, 4))
    H[:, 0, 0] = dy / r2
    H[:, 0, 1] = -dx / r2
    H[:, 1, 0] = dx / r
    H[:, 1, 1] = dy / r
    R = np.diag([sensor.sigma_theta ** 2, sensor.sigma_r ** 2])
    HP = np.einsum("jab,jbc->jac", H, covs)
    S = np.einsum("jab,jcb->jac", HP, H) + R
    S = 0.5 * (S + np.transpose(S, (0, 2, 1)))
    detS = S[:, 0, 0] * S[:, 1, 1] - S[:, 0, 1] * S[:, 1, 0]
    Sinv = np.empty_like(S)
    Sinv[:, 0, 0] = S[:, 1, 1]
    Sinv[:, 1, 1] = S[:, 0, 0]
    Sinv[:, 0, 1] = -S[:, 0, 1]
    Sinv[:, 1, 0] = -S[:, 1, 0]
    Sinv /= detS[:, None, None]
    PHt = np.transpose(HP, (0, 2, 1))
    K = PHt @ Sinv
    Pu = covs - K @ HP
    Pu = 0.5 * (Pu + np.transpose(Pu, (0, 2, 1)))
    return eta, Sinv, detS, K, Pu


def _gated_likelihoods(eta, Sinv, detS, measurements):
    """Residuals (J,n,2), gate mask and Gaussian likelihoods q (J,n)."""
    Z = np.atleast_2d(np.asarray(measurements, dtype=float))
    resid = Z[None, :, :] - eta[:, None, :]
    resid[:, :, 0] = wrap_angle(resid[:, :, 0])
    mah = np.einsum("jna,jab,jnb->jn", resid, Sinv, resid)
    gate = mah <= GATE_MAHALANOBIS2
    q = np.where(gate, np.exp(-0.5 * mah), 0.0)
    q /= (2.0 * np.pi * np.sqrt(detS))[:, None]
    return resid, gate, q


# ---------------------------------------------------------------------------
# GM-PHD recursion
# ---------------------------------------------------------------------------

def phd_predict(prior: MppDensity, motion: MotionModel,
                birth: BirthModel) -> MppDensity:
    """Predicted intensity: survival-scaled propagation plus birth."""
    F, Q = motion.transition, motion.process_noise
    ps = motion.survival_probability
    comps = [GaussianComponent(ps * c.weight, F @ c.mean, F @ c.cov @ F.T + Q)
             for c in prior.intensity.components]
    comps.extend(birth.phd.components)
    return MppDensity(GmDensity(tuple(comps)))


def phd_update(predicted: MppDensity, measurements,
               sensor: SensorModel) -> MppDensity:
    """GM-PHD measurement update with state-dependent detection.

    Missed-detection components are the predicted ones reweighted by
    (1 - p_D(mean)); each measurement spawns Kalman-updated copies of the
    gated components, normalized against clutter plus total association
    weight.
    """
    w, m, P = predicted.intensity.stacked()
    J = len(w)
    if J == 0:
        return MppDensity(GmDensity(()))
    pd = detection_probabilities(m, sensor)
    comps = [GaussianComponent((1.0 - pd[j]) * w[j], m[j], P[j])
             for j in range(J)]
    Z = np.atleast_2d(np.asarray(measurements, dtype=float)) \
        if len(measurements) else np.zeros((0, 2))
    if Z.shape[0]:
        eta, Sinv, detS, K, Pu = _ekf_precompute(m, P, sensor)
        resid, gate, q = _gated_likelihoods(eta, Sinv, detS, Z)
        unnorm = pd[:, None] * w[:, None] * q
        denom = clutter_density(sensor) + unnorm.sum(axis=0)
        for i in range(Z.shape[0]):
            if denom[i] <= 0.0:
                continue
            for j in np.nonzero(gate[:, i])[0]:
                comps.append(GaussianComponent(
                    unnorm[j, i] / denom[i],
                    m[j] + K[j] @ resid[j, i],
                    Pu[j]))
    return MppDensity(GmDensity(tuple(comps)))


# ---------------------------------------------------------------------------
# GM-MB (cardinality-balanced) recursion
# ---------------------------------------------------------------------------

def mb_predict(prior: MbDensity, motion: MotionModel,
               birth: BirthModel) -> MbDensity:
    """Survival-scaled existence, Kalman-propagated spatials, birth appended."""
    F, Q = motion.transition, motion.process_noise
    ps = motion.survival_probability
    comps = []
    for b in prior.components:
        spatial = GmDensity(tuple(
            GaussianComponent(c.weight, F @ c.mean, F @ c.cov @ F.T + Q)
            for c in b.spatial.components))
        comps.append(BernoulliComponent(ps * b.existence, spatial))
    comps.extend(birth.mb)
    return MbDensity(tuple(comps))


def mb_update(predicted: MbDensity, measurements,
              sensor: SensorModel) -> MbDensity:
    """Cardinality-balanced MB update.

    Returns legacy (missed-detection) components followed by one
    measurement-updated component per measurement with gated support;
    measurements whose gate is empty yield no component.
    """
    B = len(predicted.components)
    if B == 0:
        return MbDensity(())
    rs = np.minimum([b.existence for b in predicted.components], _R_CAP)
    # Flatten all Bernoullis' mixtures for one vectorized EKF pass.
    alpha, means, covs, owner = [], [], [], []
    for b_idx, b in enumerate(predicted.components):
        for c in b.spatial.components:
            alpha.append(c.weight)
            means.append(c.mean)
            covs.append(c.cov)
            owner.append(b_idx)
    alpha = np.array(alpha)
    means = np.stack(means)
    covs = np.stack(covs)
    owner = np.array(owner)
    pd = detection_probabilities(means, sensor)
    rho = np.zeros(B)
    np.add.at(rho, owner, alpha * pd)

    out: list[BernoulliComponent] = []
    for b_idx, b in enumerate(predicted.components):
        r, rh = rs[b_idx], min(rho[b_idx], 1.0)
        r_leg = r * (1.0 - rh) / (1.0 - r * rh)
        if 1.0 - rh < 1e-12:
            out.append(BernoulliComponent(0.0, b.spatial))
            continue
        sel = owner == b_idx
        wl = alpha[sel] * (1.0 - pd[sel]) / (1.0 - rh)
        spatial = GmDensity(tuple(
            GaussianComponent(wl[k], mu, cv) for k, (mu, cv) in
            enumerate(zip(means[sel], covs[sel]))))
        out.append(BernoulliComponent(min(max(r_leg, 0.0), 1.0), spatial))

    Z = np.atleast_2d(np.asarray(measurements, dtype=float)) \
        if len(measurements) else np.zeros((0, 2))
    if Z.shape[0]:
        eta, Sinv, detS, K, Pu = _ekf_precompute(means, covs, sensor)
        resid, gate, q = _gated_likelihoods(eta, Sinv, detS, Z)
        psi = pd[:, None] * q                      # (n_comps, n_meas)
        kappa = clutter_density(sensor)
        for i in range(Z.shape[0]):
            rho_z = np.zeros(B)
            np.add.at(rho_z, owner, alpha * psi[:, i])
            num = np.sum(rs * (1.0 - rs) * rho_z / (1.0 - rs * rho) ** 2)
            den = kappa + np.sum(rs * rho_z / (1.0 - rs * rho))
            gated = np.nonzero(gate[:, i])[0]
            if den <= 0.0 or gated.size == 0:
                continue
            wz = (rs[owner[gated]] / (1.0 - rs[owner[gated]])
                  * alpha[gated] * psi[gated, i])
            total = wz.sum()
            if total <= 0.0:
                continue
            spatial = GmDensity(tuple(
                GaussianComponent(wz[k] / total,
                                  means[j] + K[j] @ resid[j, i],
                                  Pu[j])
                for k, j in enumerate(gated)))
            r_upd = min(max(num / den, 0.0), _R_CAP)
            out.append(BernoulliComponent(r_upd, spatial))
    return MbDensity(tuple(out))


# ---------------------------------------------------------------------------
# Mixture reduction and extraction
# ---------------------------------------------------------------------------

def prune_merge(density: GmDensity, params: FilterParams) -> GmDensity:
    """Threshold-prune, greedily merge nearby components, cap the count.

    Merging is moment-preserving; candidates are absorbed into the
    current highest-weight component when their Mahalanobis^2 distance
    (in the candidate's own covariance) is within merge_threshold.
    """
    w, m, P = density.stacked()
    keep = w >= params.prune_threshold
    w, m, P = w[keep], m[keep], P[keep]
    if len(w) == 0:
        return GmDensity(())
    Pinv = np.linalg.inv(P)
    remaining = np.ones(len(w), dtype=bool)
    merged: list[GaussianComponent] = []
    while remaining.any():
        idx = np.nonzero(remaining)[0]
        j = idx[np.argmax(w[idx])]
        diff = m[idx] - m[j]
        d2 = np.einsum("ka,kab,kb->k", diff, Pinv[idx], diff)
        group = idx[d2 <= params.merge_threshold]
        wg = w[group]
        mass = wg.sum()
        mean = (wg @ m[group]) / mass
        dg = m[group] - mean
        cov = (np.einsum("k,kab->ab", wg, P[group])
               + np.einsum("k,ka,kb->ab", wg, dg, dg)) / mass
        merged.append(GaussianComponent(mass, mean, cov))
        remaining[group] = False
    merged.sort(key=lambda c: -c.weight)
    return GmDensity(tuple(merged[:params.max_components]))


def _merge_duplicate_tracks(components: list[BernoulliComponent],
                            merge_threshold: float) -> list[BernoulliComponent]:
    """Merge same-sensor Bernoullis that model one object.

    The measurement-updated/legacy structure of the MB update leaves a
    decaying trail of duplicate tracks per object whose existence sums to
    ~1 (that is what keeps the expected cardinality balanced). Fusion
    needs the component-to-object pairing instead, so trails within the
    merge gate collapse into one component: existence is the capped sum,
    the spatial density the existence-weighted mixture.
    """
    if len(components) <= 1:
        return list(components)

    def mode(comp: BernoulliComponent) -> GaussianComponent:
        return max(comp.spatial.components, key=lambda c: c.weight)

    modes = [mode(c) for c in components]
    order = np.argsort([-c.existence for c in components], kind="stable")
    used = np.zeros(len(components), dtype=bool)
    merged: list[BernoulliComponent] = []
    for lead in order:
        if used[lead]:
            continue
        # gate in the lead's mode covariance: the tight reference keeps a
        # merged (wider) mixture from absorbing ever more neighbours
        lead_inv = np.linalg.inv(modes[lead].cov)
        group = [lead]
        used[lead] = True
        for other in order:
            if used[other]:
                continue
            diff = modes[other].mean - modes[lead].mean
            if diff @ lead_inv @ diff <= merge_threshold:
                group.append(other)
                used[other] = True
        if len(group) == 1:
            merged.append(components[lead])
            continue
        total_r = sum(components[g].existence for g in group)
        comps = []
        for g in group:
            for c in components[g].spatial.components:
                comps.append(GaussianComponent(
                    components[g].existence * c.weight / total_r, c.mean, c.cov))
        merged.append(BernoulliComponent(min(total_r, _R_CAP),
                                         GmDensity(tuple(comps))))
    return merged


def reduce_mb(density: MbDensity, params: FilterParams,
              sensor: SensorModel | None = None) -> MbDensity:
    """Pipeline helper: prune negligible Bernoullis, merge duplicate
    tracks of one object, reduce each spatial mixture.

    When the owning sensor is given, tracks whose dominant mean has
    coasted outside its FoV are dropped: the sensor no longer observes
    them, their existence freezes, and they would persist as stale
    phantoms.
    """
    alive = [b for b in density.components
             if b.existence >= params.existence_prune]
    if sensor is not None:
        alive = [b for b in alive
                 if sensor.distance(max(b.spatial.components,
                                        key=lambda c: c.weight).mean)
                 <= sensor.fov_max]
    out = []
    for b in _merge_duplicate_tracks(alive, params.merge_threshold):
        spatial = prune_merge(b.spatial, params)
        if len(spatial) == 0:
            continue
        out.append(BernoulliComponent(b.existence, spatial.normalized()))
    return MbDensity(tuple(out))


def extract_phd_estimates(density: MppDensity) -> list[np.ndarray]:
    """floor(mass) highest-weight component means, capped by the count."""
    comps = density.intensity.components
    n = int(np.floor(density.mean_cardinality + 1e-9))
    n = min(n, len(comps))
    if n <= 0:
        return []
    order = np.argsort([-c.weight for c in comps], kind="stable")
    return [comps[j].mean for j in order[:n]]


def extract_mb_estimates(density: MbDensity,
                         params: FilterParams) -> list[np.ndarray]:
    """round(sum r) states from the highest-existence Bernoullis.

    Ties in existence break by component index order; each state is the
    mean of the component's highest-weight Gaussian.
    """
    comps = density.components
    total = sum(b.existence for b in comps)
    n = min(int(np.floor(total + 0.5)), len(comps))
    if n <= 0:
        return []
    order = np.argsort([-b.existence for b in comps], kind="stable")
    states = []
    for j in order[:n]:
        spatial = comps[j].spatial.components
        best = max(range(len(spatial)), key=lambda k: (spatial[k].weight, -k))
        states.append(spatial[best].mean)
    return states
