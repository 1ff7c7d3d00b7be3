"""Estimation-uncertainty-driven fusion weights.

The estimation uncertainty function (EUF) combines an accuracy part
(determinant of the coordinate-converted measurement covariance at the
noise-free measurement) and a cardinality part (clutter intensity over
detection probability, infinite outside the FoV). Its reciprocal is the
information confidence coefficient (ICC); per-cell normalized ICCs form
the precomputed heterogeneous weight map over a space partition.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .densities import SpacePartition
from .models import (
    SensorModel,
    _converted_cov_terms,
    converted_covariance,
    detection_probability,
    detection_probabilities,
    fov_indicator,
    measure,
)

__all__ = [
    "EufParams",
    "WeightMap",
    "aeuf",
    "ceuf",
    "euf",
    "icc",
    "normalize_weights",
    "build_weight_map",
    "lookup_weight",
    "write_weight_map_csv",
    "clutter_position_intensity",
]


@dataclass(frozen=True)
class EufParams:
    """Trade-off coefficients for accuracy (u1) and cardinality (u2)."""

    u1: float = 1.0
    u2: float = 800.0

    def __post_init__(self):
        if self.u1 < 0.0 or self.u2 < 0.0:
            raise ValueError("u1 and u2 must be >= 0")


def clutter_position_intensity(sensor: SensorModel) -> float:
    """Clutter intensity converted to position space: lambda_c / (pi Ymax^2)."""
    return sensor.clutter_rate / (math.pi * sensor.fov_max ** 2)


def aeuf(x, sensor: SensorModel) -> float:
    """Accuracy uncertainty: |R(z*)| at the noise-free measurement of x."""
    z = measure(x, sensor)
    R = converted_covariance(z, sensor.sigma_r, sensor.sigma_theta)
    return float(R[0, 0] * R[1, 1] - R[0, 1] * R[1, 0])


def ceuf(x, sensor: SensorModel) -> float:
    """Cardinality uncertainty: clutter intensity over detection rate.

    Infinite outside the FoV (zero confidence there).
    """
    if not fov_indicator(x, sensor):
        return math.inf
    return clutter_position_intensity(sensor) / detection_probability(x, sensor)


def euf(x, sensor: SensorModel, params: EufParams) -> float:
    """Total uncertainty u1 * AEUF + u2 * CEUF; infinite iff CEUF is."""
    c = ceuf(x, sensor)
    if math.isinf(c):
        return math.inf
    return params.u1 * aeuf(x, sensor) + params.u2 * c


def icc(x, sensor: SensorModel, params: EufParams) -> float:
    """Information confidence: reciprocal of the EUF, 0 when it is infinite."""
    e = euf(x, sensor, params)
    if math.isinf(e):
        return 0.0
    return 1.0 / e if e > 0.0 else math.inf


def normalize_weights(iccs) -> tuple[np.ndarray, bool]:
    """Normalize nonnegative ICCs to sum 1.

    Returns (weights, flagged). All-zero input yields uniform weights with
    flagged=True. Infinite ICCs (degenerate configs) share the cell
    uniformly among themselves, finite ones get zero.
    """
    arr = np.asarray(iccs, dtype=float)
    if np.any(arr < 0.0):
        raise ValueError("ICCs must be >= 0")
    inf = np.isinf(arr)
    if inf.any():
        return inf / inf.sum(), False
    total = arr.sum()
    if total == 0.0:
        return np.full(arr.shape, 1.0 / arr.size), True
    return arr / total, False


@dataclass(frozen=True)
class WeightMap:
    """Per-sensor, per-cell heterogeneous fusion weights.

    weights and iccs have shape (n_sensors, n_cells) in the partition's
    flat cell order; `flagged` marks cells where every sensor's ICC was
    zero (weights set uniform there; local intensities vanish on such
    cells so the fused result is unaffected).
    """

    partition: SpacePartition
    weights: np.ndarray
    iccs: np.ndarray
    flagged: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        ic = np.asarray(self.iccs, dtype=float)
        fl = np.asarray(self.flagged, dtype=bool)
        if w.shape != ic.shape or w.ndim != 2 or w.shape[1] != self.partition.n_cells:
            raise ValueError("weight/icc arrays must be (n_sensors, n_cells)")
        if fl.shape != (w.shape[1],):
            raise ValueError("flag array must be (n_cells,)")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "iccs", ic)
        object.__setattr__(self, "flagged", fl)

    @property
    def n_sensors(self) -> int:
        return self.weights.shape[0]

    @staticmethod
    def constant(partition: SpacePartition, sensor_weights) -> "WeightMap":
        """Homogeneous map: every cell carries the same sensor weights."""
        w = np.asarray(sensor_weights, dtype=float)
        cells = partition.n_cells
        return WeightMap(partition,
                         np.repeat(w[:, None], cells, axis=1),
                         np.repeat(w[:, None], cells, axis=1),
                         np.zeros(cells, dtype=bool))


def _vector_euf(sensors: Sequence[SensorModel], centers: np.ndarray,
                params: EufParams) -> np.ndarray:
    """EUF of every sensor at every cell center, (n_sensors, n_cells)."""
    out = np.empty((len(sensors), centers.shape[0]))
    for i, s in enumerate(sensors):
        dx = centers[:, 0] - s.position[0]
        dy = centers[:, 1] - s.position[1]
        r = np.hypot(dx, dy)
        if np.any(r == 0.0):
            raise ValueError(
                f"sensor {i} sits exactly on a cell center; shift it off the grid")
        theta = np.arctan2(dx, dy)
        r11, r22, r12 = _converted_cov_terms(theta, r, s.sigma_r, s.sigma_theta)
        acc = r11 * r22 - r12 * r12
        pd = detection_probabilities(centers, s)
        with np.errstate(divide="ignore"):
            card = np.where(r <= s.fov_max,
                            clutter_position_intensity(s) / pd, np.inf)
        out[i] = params.u1 * acc + params.u2 * card
    return out


def build_weight_map(sensors: Sequence[SensorModel], partition: SpacePartition,
                     params: EufParams) -> WeightMap:
    """Evaluate ICCs at cell centers (zero velocity) and normalize per cell."""
    if not sensors:
        raise ValueError("need at least one sensor")
    centers = partition.centers()
    eufs = _vector_euf(sensors, centers, params)
    iccs = np.where(np.isinf(eufs), 0.0, 1.0 / eufs)
    totals = iccs.sum(axis=0)
    flagged = totals == 0.0
    weights = np.empty_like(iccs)
    np.divide(iccs, totals[None, :], out=weights, where=~flagged[None, :])
    weights[:, flagged] = 1.0 / len(sensors)
    return WeightMap(partition, weights, iccs, flagged)


def lookup_weight(weight_map: WeightMap, sensor_index: int, x) -> float:
    """Weight of the cell containing x (clamped to the partition bounds)."""
    cell = weight_map.partition.locate(np.asarray(x, dtype=float)[:2])
    return float(weight_map.weights[sensor_index, cell])


def write_weight_map_csv(weight_map: WeightMap, path) -> None:
    """CSV export: cell indices, center coordinates, per-sensor weights."""
    part = weight_map.partition
    header = ["cell_x_index", "cell_y_index", "center_x_m", "center_y_m"]
    header += [f"sensor_{i}_weight" for i in range(weight_map.n_sensors)]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for cell in range(part.n_cells):
            ix, iy = part.cell_xy(cell)
            cx, cy = part.cell_center(cell)
            row = [str(ix), str(iy), f"{cx:.17g}", f"{cy:.17g}"]
            row += [f"{weight_map.weights[i, cell]:.17g}"
                    for i in range(weight_map.n_sensors)]
            writer.writerow(row)
