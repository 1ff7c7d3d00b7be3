"""Motion and sensor models.

Per-axis constant-velocity dynamics, the range-angle measurement model
with its Jacobian, the coordinate-converted measurement covariance, and
the circular field-of-view / tiered detection-probability functions.

State convention: x = [px, py, vx, vy] (m, m, m/s, m/s).
Measurement convention: z = [angle, range] with angle = atan2(dx, dy)
measured from the +y axis toward +x, in (-pi, pi].
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "MotionModel",
    "SensorModel",
    "measure",
    "measure_jacobian",
    "converted_covariance",
    "fov_indicator",
    "detection_probability",
    "wrap_angle",
]


def wrap_angle(a):
    """Wrap angle(s) to (-pi, pi]."""
    return np.pi - np.mod(np.pi - np.asarray(a, dtype=float), 2.0 * np.pi)


@dataclass(frozen=True)
class MotionModel:
    """Linear-Gaussian dynamics with per-axis constant-velocity blocks."""

    transition: np.ndarray          # F, 4x4
    process_noise: np.ndarray       # Q, 4x4
    sampling_interval: float
    survival_probability: float

    def __post_init__(self):
        F = np.array(self.transition, dtype=float).reshape(4, 4)
        Q = np.array(self.process_noise, dtype=float).reshape(4, 4)
        Q = 0.5 * (Q + Q.T)
        ps = float(self.survival_probability)
        if not 0.0 <= ps <= 1.0:
            raise ValueError(f"survival probability must be in [0,1], got {ps}")
        if np.linalg.eigvalsh(Q).min() < -1e-9 * max(np.trace(Q), 1.0):
            raise ValueError("process noise covariance must be PSD")
        object.__setattr__(self, "transition", F)
        object.__setattr__(self, "process_noise", Q)
        object.__setattr__(self, "sampling_interval", float(self.sampling_interval))
        object.__setattr__(self, "survival_probability", ps)

    @staticmethod
    def constant_velocity(sampling_interval: float = 1.0,
                          process_noise_std: float = 0.1,
                          survival_probability: float = 0.98) -> "MotionModel":
        """Kronecker per-axis CV model: F = [[1,T],[0,1]] (x) I2, Q likewise."""
        T = float(sampling_interval)
        F = np.kron(np.array([[1.0, T], [0.0, 1.0]]), np.eye(2))
        q = np.array([[T ** 3 / 3.0, T ** 2 / 2.0],
                      [T ** 2 / 2.0, T]])
        Q = (process_noise_std ** 2) * np.kron(q, np.eye(2))
        return MotionModel(F, Q, T, survival_probability)


@dataclass(frozen=True)
class SensorModel:
    """Range-angle sensor with a circular FoV and tiered detection rates."""

    position: np.ndarray                      # (2,) m
    range_tiers: tuple[float, float, float]   # (Y1, Y2, Ymax) m
    tier_pd: tuple[float, float, float] = (0.98, 0.8, 0.6)
    clutter_rate: float = 5.0                 # expected false alarms per scan
    sigma_theta: float = np.deg2rad(2.0)      # rad
    sigma_r: float = 20.0                     # m

    def __post_init__(self):
        pos = np.array(self.position, dtype=float).reshape(2)
        tiers = tuple(float(t) for t in self.range_tiers)
        pd = tuple(float(p) for p in self.tier_pd)
        if not (0.0 < tiers[0] <= tiers[1] <= tiers[2]):
            raise ValueError(f"range tiers must satisfy 0 < Y1 <= Y2 <= Ymax, got {tiers}")
        if any(not 0.0 <= p <= 1.0 for p in pd):
            raise ValueError(f"tier detection probabilities must be in [0,1], got {pd}")
        if self.clutter_rate < 0.0:
            raise ValueError("clutter rate must be >= 0")
        object.__setattr__(self, "position", pos)
        object.__setattr__(self, "range_tiers", tiers)
        object.__setattr__(self, "tier_pd", pd)
        object.__setattr__(self, "clutter_rate", float(self.clutter_rate))
        object.__setattr__(self, "sigma_theta", float(self.sigma_theta))
        object.__setattr__(self, "sigma_r", float(self.sigma_r))

    @property
    def fov_max(self) -> float:
        return self.range_tiers[2]

    def distance(self, state) -> float:
        s = np.asarray(state, dtype=float).reshape(-1)
        return float(np.hypot(s[0] - self.position[0], s[1] - self.position[1]))


def measure(state, sensor: SensorModel) -> np.ndarray:
    """Noise-free measurement [atan2(dx, dy), range] of a state."""
    s = np.asarray(state, dtype=float).reshape(-1)
    dx = s[0] - sensor.position[0]
    dy = s[1] - sensor.position[1]
    r = float(np.hypot(dx, dy))
    if r == 0.0:
        raise ValueError("state coincides with the sensor position (degenerate geometry)")
    return np.array([np.arctan2(dx, dy), r])


def measure_jacobian(state, sensor: SensorModel) -> np.ndarray:
    """2x4 Jacobian of `measure` at `state`; velocity columns are zero."""
    s = np.asarray(state, dtype=float).reshape(-1)
    dx = s[0] - sensor.position[0]
    dy = s[1] - sensor.position[1]
    r2 = dx * dx + dy * dy
    if r2 == 0.0:
        raise ValueError("zero range (degenerate geometry)")
    r = np.sqrt(r2)
    return np.array([
        [dy / r2, -dx / r2, 0.0, 0.0],
        [dx / r, dy / r, 0.0, 0.0],
    ])


def _converted_cov_terms(theta, r, sigma_r: float, sigma_theta: float):
    """Vectorized entries of the coordinate-converted covariance."""
    theta = np.asarray(theta, dtype=float)
    r = np.asarray(r, dtype=float)
    lam = sigma_theta ** 2
    c2 = np.cos(theta) ** 2
    s2 = np.sin(theta) ** 2
    sc = np.sin(theta) * np.cos(theta)
    e2 = np.exp(-2.0 * lam)
    ch1, ch2 = np.cosh(lam), np.cosh(2.0 * lam)
    sh1, sh2 = np.sinh(lam), np.sinh(2.0 * lam)
    sr2 = sigma_r ** 2
    r11 = (r ** 2) * e2 * (c2 * (ch2 - ch1) + s2 * (sh2 - sh1)) \
        + sr2 * e2 * (c2 * (2.0 * ch2 - ch1) + s2 * (2.0 * sh2 - sh1))
    r22 = (r ** 2) * e2 * (s2 * (ch2 - ch1) + c2 * (sh2 - sh1)) \
        + sr2 * e2 * (s2 * (2.0 * ch2 - ch1) + c2 * (2.0 * sh2 - sh1))
    r12 = sc * np.exp(-4.0 * lam) * (sr2 + (1.0 - np.exp(lam)) * (r ** 2 + sr2))
    return r11, r22, r12


def converted_covariance(z, sigma_r: float, sigma_theta: float) -> np.ndarray:
    """Cartesian covariance of a polar measurement z = [angle, range].

    Implements the exact moment expressions for the converted measurement
    (Lerro/Bar-Shalom style): the first Cartesian coordinate lies along
    the angle-zero ray, i.e. positions (r cos(theta), r sin(theta)).
    """
    z = np.asarray(z, dtype=float).reshape(2)
    theta, r = z[0], z[1]
    if r < 0.0:
        raise ValueError(f"range must be >= 0, got {r}")
    r11, r22, r12 = _converted_cov_terms(theta, r, sigma_r, sigma_theta)
    return np.array([[r11, r12], [r12, r22]])


def fov_indicator(state, sensor: SensorModel) -> int:
    """1 iff the state is inside or on the sensor FoV boundary."""
    return int(sensor.distance(state) <= sensor.fov_max)


def detection_probability(state, sensor: SensorModel) -> float:
    """Tiered detection probability; boundary ties go to the inner tier."""
    d = sensor.distance(state)
    t1, t2, tmax = sensor.range_tiers
    if d <= t1:
        return sensor.tier_pd[0]
    if d <= t2:
        return sensor.tier_pd[1]
    if d <= tmax:
        return sensor.tier_pd[2]
    return 0.0


def detection_probabilities(positions: np.ndarray, sensor: SensorModel) -> np.ndarray:
    """Vectorized `detection_probability` over (N, >=2) state rows."""
    p = np.atleast_2d(np.asarray(positions, dtype=float))[:, :2]
    d = np.hypot(p[:, 0] - sensor.position[0], p[:, 1] - sensor.position[1])
    t1, t2, tmax = sensor.range_tiers
    return np.select([d <= t1, d <= t2, d <= tmax],
                     list(sensor.tier_pd), default=0.0)
