"""Scenario/configuration files.

One JSON document describes a whole experiment: region, motion model,
sensors, ground-truth tracks, filter and fusion parameters, pipelines,
runs, and the seed. `load_config` turns it into runtime objects;
`validate_raw` reports schema violations without building anything.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .densities import (
    BernoulliComponent,
    GaussianComponent,
    GmDensity,
    SpacePartition,
)
from .filters import BirthModel, FilterParams
from .fusion_mb import MbFusionParams
from .metrics import OspaParams
from .models import MotionModel, SensorModel
from .sim import PipelineSettings, Scenario, validate_pipelines
from .weights import EufParams, euf

__all__ = ["RunConfig", "load_config", "load_bundled", "validate_raw",
           "default_delta_epsilon", "BUNDLED_CONFIGS"]

BUNDLED_CONFIGS = ("case1", "case2")


@dataclass(frozen=True)
class RunConfig:
    """Parsed experiment: scenario plus pipeline settings plus run count."""

    name: str
    scenario: Scenario
    settings: PipelineSettings
    runs: int


def default_delta_epsilon(sensor: SensorModel, params: EufParams) -> float:
    """10x the EUF spread across the sensor's inner detection tier."""
    radii = np.linspace(1.0, sensor.range_tiers[0], 64)
    values = [euf(np.array([0.0, r, 0.0, 0.0]) + np.array(
        [sensor.position[0], sensor.position[1], 0.0, 0.0]), sensor, params)
        for r in radii]
    return 10.0 * (max(values) - min(values))


def _sensor_from_dict(d: dict) -> SensorModel:
    return SensorModel(
        position=d["position"],
        range_tiers=tuple(d["range_tiers"]),
        tier_pd=tuple(d.get("tier_pd", (0.98, 0.8, 0.6))),
        clutter_rate=d.get("clutter_rate", 5.0),
        sigma_theta=np.deg2rad(d.get("sigma_theta_deg", 2.0)),
        sigma_r=d.get("sigma_r_m", 20.0),
    )


def _birth_from_dict(d: dict) -> BirthModel:
    pos_var = float(d.get("position_std_m", 200.0)) ** 2
    vel_var = float(d.get("velocity_std_ms", 10.0)) ** 2
    cov = np.diag([pos_var, pos_var, vel_var, vel_var])
    phd_weight = float(d.get("phd_weight", 0.1))
    mb_existence = float(d.get("mb_existence", 0.03))
    phd_comps, mb_comps = [], []
    for loc in d["locations"]:
        mean = np.array([loc[0], loc[1], 0.0, 0.0])
        phd_comps.append(GaussianComponent(phd_weight, mean, cov))
        spatial = GmDensity((GaussianComponent(1.0, mean, cov),))
        mb_comps.append(BernoulliComponent(mb_existence, spatial))
    return BirthModel(phd=GmDensity(tuple(phd_comps)), mb=tuple(mb_comps))


def _filter_params(d: dict, defaults: FilterParams) -> FilterParams:
    return FilterParams(
        prune_threshold=d.get("prune_threshold", defaults.prune_threshold),
        merge_threshold=d.get("merge_threshold", defaults.merge_threshold),
        max_components=d.get("max_components", defaults.max_components),
        existence_prune=d.get("existence_prune", defaults.existence_prune),
        extraction_threshold=d.get("extraction_threshold",
                                   defaults.extraction_threshold),
    )


def config_from_dict(raw: dict, name: str = "config") -> RunConfig:
    bounds = np.array(raw["region_bounds"], dtype=float)
    motion_raw = raw.get("motion", {})
    motion = MotionModel.constant_velocity(
        sampling_interval=motion_raw.get("sampling_interval", 1.0),
        process_noise_std=motion_raw.get("process_noise_std", 0.1),
        survival_probability=motion_raw.get("survival_probability", 0.98),
    )
    sensors = tuple(_sensor_from_dict(s) for s in raw["sensors"])
    from .sim import Track
    tracks = tuple(Track(t["birth_scan"], t["death_scan"], t["initial_state"])
                   for t in raw["tracks"])
    scenario = Scenario(
        duration_scans=int(raw["duration_scans"]),
        bounds=bounds,
        motion=motion,
        sensors=sensors,
        tracks=tracks,
        seed=int(raw.get("seed", 0)),
        truth_noise=bool(raw.get("truth_noise", False)),
    )
    euf_raw = raw.get("euf", {})
    euf_params = EufParams(u1=euf_raw.get("u1", 1.0), u2=euf_raw.get("u2", 800.0))
    part_raw = raw.get("partition", {"dims": [100, 100]})
    partition = SpacePartition.regular(bounds, tuple(part_raw["dims"]))
    filters_raw = raw.get("filters", {})
    phd_params = _filter_params(filters_raw.get("phd", {}),
                                FilterParams(max_components=100))
    mb_params = _filter_params(filters_raw.get("mb", {}),
                               FilterParams(max_components=20))
    fusion_raw = dict(raw.get("mb_fusion", {}))
    if fusion_raw.get("delta_epsilon") is None:
        fusion_raw["delta_epsilon"] = default_delta_epsilon(sensors[0], euf_params)
    mb_fusion = MbFusionParams(
        gamma=fusion_raw.get("gamma", 10.0),
        alpha=fusion_raw.get("alpha", 0.95),
        delta_epsilon=fusion_raw["delta_epsilon"],
        symmetric_kld=fusion_raw.get("symmetric_kld", False),
    )
    ospa_raw = raw.get("ospa", {})
    ospa_params = OspaParams(order=ospa_raw.get("order", 1.0),
                             cutoff=ospa_raw.get("cutoff", 100.0))
    settings = PipelineSettings(
        pipelines=tuple(raw["pipelines"]),
        phd_params=phd_params,
        mb_params=mb_params,
        birth=_birth_from_dict(raw["birth"]),
        euf=euf_params,
        partition=partition,
        mb_fusion=mb_fusion,
        ospa=ospa_params,
        steady_state_start=int(raw.get("steady_state_start", 20)),
    )
    validate_pipelines(settings.pipelines, len(sensors))
    return RunConfig(name=raw.get("name", name), scenario=scenario,
                     settings=settings, runs=int(raw.get("runs", 1)))


def load_config(path) -> RunConfig:
    path = Path(path)
    with open(path) as fh:
        raw = json.load(fh)
    return config_from_dict(raw, name=path.stem)


def load_bundled(name: str) -> RunConfig:
    """Load one of the shipped scenarios (case1, case2)."""
    if name not in BUNDLED_CONFIGS:
        raise ValueError(f"unknown bundled config {name!r}; have {BUNDLED_CONFIGS}")
    text = resources.files("rfsfuse").joinpath(f"data/{name}.json").read_text()
    return config_from_dict(json.loads(text), name=name)


def bundled_path(name: str) -> Path:
    """Filesystem path of a shipped scenario asset."""
    return Path(str(resources.files("rfsfuse").joinpath(f"data/{name}.json")))


def validate_raw(raw: dict) -> list[str]:
    """Schema/invariant violations in a raw config dict, empty when valid."""
    problems: list[str] = []
    for key in ("region_bounds", "duration_scans", "sensors", "tracks",
                "birth", "pipelines"):
        if key not in raw:
            problems.append(f"missing required key {key!r}")
    if problems:
        return problems
    duration = raw["duration_scans"]
    bounds = np.array(raw["region_bounds"], dtype=float)
    for idx, t in enumerate(raw["tracks"]):
        if not t["birth_scan"] < t["death_scan"]:
            problems.append(f"track {idx}: birth_scan must be < death_scan")
        if t["death_scan"] > duration:
            problems.append(f"track {idx}: death_scan exceeds duration_scans")
        p = np.asarray(t["initial_state"][:2], dtype=float)
        if np.any(p < bounds[:, 0]) or np.any(p > bounds[:, 1]):
            problems.append(f"track {idx}: initial state outside the region")
    for idx, s in enumerate(raw["sensors"]):
        try:
            _sensor_from_dict(s)
        except (ValueError, KeyError) as exc:
            problems.append(f"sensor {idx}: {exc}")
    try:
        validate_pipelines(raw["pipelines"], len(raw["sensors"]))
    except ValueError as exc:
        problems.append(str(exc))
    if raw.get("runs", 1) < 1:
        problems.append("runs must be >= 1")
    return problems
