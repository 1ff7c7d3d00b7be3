"""Scenario generation and the Monte-Carlo experiment runner.

Ground-truth propagation, measurement synthesis (tiered detections plus
uniform clutter), seeded counter-based RNG streams, and the per-scan
orchestration of local filters and fusion pipelines.

RNG splitting rule: each (run, sensor, scan) triple owns a Philox stream
whose 128-bit key packs the scenario seed in the low word and
(run << 32 | sensor << 16 | scan) in the high word. Truth process noise
uses the reserved sensor slot 0xFFFF. Identical (scenario, seed, config)
therefore reproduce byte-identical results, run by run.
"""

from __future__ import annotations

import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .densities import GmDensity, MbDensity, MppDensity, SpacePartition
from .filters import (
    BirthModel,
    FilterParams,
    extract_mb_estimates,
    extract_phd_estimates,
    mb_predict,
    mb_update,
    phd_predict,
    phd_update,
    prune_merge,
    reduce_mb,
)
from .fusion_mb import MbFusionParams, hmmb_fuse
from .fusion_phd import FusionInputPhd, hmphd_fuse
from .metrics import OspaParams, ospa
from .models import MotionModel, SensorModel, detection_probability, measure, wrap_angle
from .weights import EufParams, WeightMap, build_weight_map

__all__ = [
    "Track",
    "Scenario",
    "ScanData",
    "scan_stream",
    "generate_truth",
    "generate_measurements",
    "PipelineSettings",
    "McResult",
    "run_monte_carlo",
    "THREADS_ENV_VAR",
]

THREADS_ENV_VAR = "RFS_FUSE_THREADS"
_TRUTH_STREAM_SENSOR = 0xFFFF

FUSION_PIPELINES = ("waa-phd", "hmphd", "waa-mb", "hmmb")


@dataclass(frozen=True)
class Track:
    """One object: alive on scans [birth_scan, death_scan], 1-based."""

    birth_scan: int
    death_scan: int
    initial_state: np.ndarray

    def __post_init__(self):
        state = np.asarray(self.initial_state, dtype=float).reshape(4)
        if not self.birth_scan < self.death_scan:
            raise ValueError("track must satisfy birth_scan < death_scan")
        object.__setattr__(self, "initial_state", state)

    def alive(self, scan: int) -> bool:
        return self.birth_scan <= scan <= self.death_scan


@dataclass(frozen=True)
class Scenario:
    """Surveillance region, motion model, sensors, tracks, and the seed."""

    duration_scans: int
    bounds: np.ndarray
    motion: MotionModel
    sensors: tuple[SensorModel, ...]
    tracks: tuple[Track, ...]
    seed: int
    truth_noise: bool = False

    def __post_init__(self):
        b = np.array(self.bounds, dtype=float).reshape(2, 2)
        object.__setattr__(self, "bounds", b)
        object.__setattr__(self, "sensors", tuple(self.sensors))
        object.__setattr__(self, "tracks", tuple(self.tracks))
        for t in self.tracks:
            if t.death_scan > self.duration_scans:
                raise ValueError("track death must be <= duration_scans")
            p = t.initial_state[:2]
            if np.any(p < b[:, 0]) or np.any(p > b[:, 1]):
                raise ValueError("track initial state lies outside the region")


@dataclass(frozen=True)
class ScanData:
    """Per-sensor measurement sets for one scan, angles in (-pi, pi]."""

    measurements: tuple[np.ndarray, ...]


def scan_stream(seed: int, run: int, sensor: int, scan: int) -> np.random.Generator:
    """Counter-based stream for the (run, sensor, scan) triple."""
    high = ((run & 0xFFFFFFFF) << 32) | ((sensor & 0xFFFF) << 16) | (scan & 0xFFFF)
    key = (high << 64) | (seed & 0xFFFFFFFFFFFFFFFF)
    return np.random.Generator(np.random.Philox(key=key))


def generate_truth(scenario: Scenario, run: int = 0) -> list[np.ndarray]:
    """Per-scan ground-truth states (n_k, 4).

    Tracks propagate through the transition matrix between birth and
    death; when `truth_noise` is set, per-scan process noise is drawn
    from the reserved truth stream.
    """
    F = scenario.motion.transition
    Q = scenario.motion.process_noise
    noisy = scenario.truth_noise
    if noisy:
        L = np.linalg.cholesky(Q + 1e-12 * np.eye(4))
    states = [t.initial_state.copy() for t in scenario.tracks]
    out: list[np.ndarray] = []
    for scan in range(1, scenario.duration_scans + 1):
        rng = scan_stream(scenario.seed, run, _TRUTH_STREAM_SENSOR, scan) \
            if noisy else None
        alive = []
        for idx, t in enumerate(scenario.tracks):
            if scan > t.birth_scan:
                states[idx] = F @ states[idx]
                if noisy:
                    states[idx] = states[idx] + L @ rng.standard_normal(4)
            if t.alive(scan):
                alive.append(states[idx].copy())
        out.append(np.stack(alive) if alive else np.zeros((0, 4)))
    return out


def generate_measurements(truth: list[np.ndarray],
                          sensors: tuple[SensorModel, ...],
                          seed: int, run: int = 0) -> list[ScanData]:
    """Detections (probability p_D inside the FoV) plus Poisson clutter.

    Clutter is uniform in (angle, range) over the measurement space
    (-pi, pi] x [0, fov_max). Draw order per sensor-scan stream: one
    uniform per in-FoV object, two normals per detection, then the
    clutter block.
    """
    out = []
    for scan_idx, states in enumerate(truth, start=1):
        per_sensor = []
        for s_idx, sensor in enumerate(sensors):
            rng = scan_stream(seed, run, s_idx, scan_idx)
            zs = []
            for x in states:
                if sensor.distance(x) > sensor.fov_max:
                    continue
                if rng.uniform() < detection_probability(x, sensor):
                    z = measure(x, sensor)
                    noise = rng.standard_normal(2) * np.array(
                        [sensor.sigma_theta, sensor.sigma_r])
                    z = z + noise
                    z[0] = wrap_angle(z[0])
                    z[1] = abs(z[1])
                    zs.append(z)
            n_clutter = int(rng.poisson(sensor.clutter_rate))
            if n_clutter:
                angles = rng.uniform(-np.pi, np.pi, size=n_clutter)
                ranges = rng.uniform(0.0, sensor.fov_max, size=n_clutter)
                zs.extend(np.column_stack([wrap_angle(angles), ranges]))
            per_sensor.append(np.stack(zs) if zs else np.zeros((0, 2)))
        out.append(ScanData(tuple(per_sensor)))
    return out


@dataclass(frozen=True)
class PipelineSettings:
    """Everything the per-run worker needs besides the scenario."""

    pipelines: tuple[str, ...]
    phd_params: FilterParams
    mb_params: FilterParams
    birth: BirthModel
    euf: EufParams
    partition: SpacePartition
    mb_fusion: MbFusionParams
    ospa: OspaParams
    steady_state_start: int = 20

    def __post_init__(self):
        if not self.pipelines:
            raise ValueError("at least one pipeline required")
        object.__setattr__(self, "pipelines", tuple(self.pipelines))


def validate_pipelines(pipelines, n_sensors: int) -> None:
    for name in pipelines:
        if name in FUSION_PIPELINES:
            continue
        if name.startswith("local:"):
            try:
                idx = int(name.split(":", 1)[1])
            except ValueError:
                raise ValueError(f"unknown pipeline {name!r}") from None
            if not 0 <= idx < n_sensors:
                raise ValueError(f"pipeline {name!r}: sensor index out of range")
            continue
        raise ValueError(f"unknown pipeline {name!r}")


def _sensor_birth(birth: BirthModel, sensor: SensorModel) -> BirthModel:
    """Restrict the birth model to locations inside the sensor's FoV.

    A sensor never observes objects outside its FoV, so out-of-view birth
    components would accumulate unbounded ghost mass in its local filter.
    """
    phd = GmDensity(tuple(c for c in birth.phd.components
                          if sensor.distance(c.mean) <= sensor.fov_max))
    mb = tuple(b for b in birth.mb
               if sensor.distance(b.spatial.components[0].mean) <= sensor.fov_max)
    return BirthModel(phd=phd, mb=mb)


def _confirmed(densities, params: FilterParams) -> list[MbDensity]:
    """Tracks a sensor reports to the fusion center: existence >= cutoff.

    Tentative (ramping or clutter-born) components stay local; vague
    densities would otherwise chain unrelated clusters together in the
    KLD clustering.
    """
    return [MbDensity(tuple(b for b in d.components
                            if b.existence >= params.extraction_threshold))
            for d in densities]


def _need_phd(pipelines) -> bool:
    return any(p.startswith("local:") or p in ("waa-phd", "hmphd")
               for p in pipelines)


def _need_mb(pipelines) -> bool:
    return any(p in ("waa-mb", "hmmb") for p in pipelines)


def run_single(scenario: Scenario, settings: PipelineSettings,
               weight_map: WeightMap, run: int,
               clustering_log: list | None = None) -> dict:
    """One Monte-Carlo run: all configured pipelines over all scans."""
    truth = generate_truth(scenario, run)
    scans = generate_measurements(truth, scenario.sensors, scenario.seed, run)
    n_sensors = len(scenario.sensors)
    uniform = np.full(n_sensors, 1.0 / n_sensors)
    births = [_sensor_birth(settings.birth, s) for s in scenario.sensors]

    need_phd, need_mb = _need_phd(settings.pipelines), _need_mb(settings.pipelines)
    phd_local = [MppDensity(GmDensity(()))] * n_sensors
    mb_local = [MbDensity(())] * n_sensors

    n_scans = scenario.duration_scans
    ospa_out = {p: np.zeros(n_scans) for p in settings.pipelines}
    card_out = {p: np.zeros(n_scans) for p in settings.pipelines}
    true_card = np.zeros(n_scans)
    runtimes = dict.fromkeys(list(settings.pipelines) + ["local_filters"], 0.0)

    for k in range(n_scans):
        truth_pos = truth[k][:, :2]
        true_card[k] = truth[k].shape[0]
        t0 = time.perf_counter()
        for i, sensor in enumerate(scenario.sensors):
            Z = scans[k].measurements[i]
            if need_phd:
                pred = phd_predict(phd_local[i], scenario.motion, births[i])
                post = phd_update(pred, Z, sensor)
                phd_local[i] = MppDensity(
                    prune_merge(post.intensity, settings.phd_params))
            if need_mb:
                pred_mb = mb_predict(mb_local[i], scenario.motion, births[i])
                post_mb = mb_update(pred_mb, Z, sensor)
                mb_local[i] = reduce_mb(post_mb, settings.mb_params, sensor)
        runtimes["local_filters"] += time.perf_counter() - t0

        for name in settings.pipelines:
            t0 = time.perf_counter()
            if name.startswith("local:"):
                idx = int(name.split(":", 1)[1])
                est = extract_phd_estimates(phd_local[idx])
            elif name == "waa-phd":
                fused = hmphd_fuse(FusionInputPhd(
                    tuple(phd_local), scalar_weights=uniform))
                fused = MppDensity(prune_merge(fused.intensity, settings.phd_params))
                est = extract_phd_estimates(fused)
            elif name == "hmphd":
                fused = hmphd_fuse(FusionInputPhd(
                    tuple(phd_local), weight_map=weight_map))
                fused = MppDensity(prune_merge(fused.intensity, settings.phd_params))
                est = extract_phd_estimates(fused)
            elif name == "waa-mb":
                fused_mb = hmmb_fuse(_confirmed(mb_local, settings.mb_params),
                                     None, settings.mb_fusion,
                                     scalar_weights=uniform)
                fused_mb = reduce_mb(fused_mb, settings.mb_params)
                est = extract_mb_estimates(fused_mb, settings.mb_params)
            else:  # hmmb
                want_log = clustering_log is not None
                result = hmmb_fuse(_confirmed(mb_local, settings.mb_params),
                                   weight_map, settings.mb_fusion,
                                   return_details=want_log)
                if want_log:
                    fused_mb, details = result
                    clustering_log.append({"scan": k + 1, "clusters": details})
                else:
                    fused_mb = result
                fused_mb = reduce_mb(fused_mb, settings.mb_params)
                est = extract_mb_estimates(fused_mb, settings.mb_params)
            positions = np.array([e[:2] for e in est]) if est else np.zeros((0, 2))
            ospa_out[name][k] = ospa(truth_pos, positions, settings.ospa)
            card_out[name][k] = len(est)
            runtimes[name] += time.perf_counter() - t0

    return {"ospa": ospa_out, "cardinality": card_out,
            "true_cardinality": true_card, "runtimes": runtimes}


@dataclass
class McResult:
    """Per-run, per-scan OSPA and cardinality for every pipeline."""

    pipelines: tuple[str, ...]
    ospa: dict[str, np.ndarray]          # (runs, scans)
    cardinality: dict[str, np.ndarray]   # (runs, scans)
    true_cardinality: np.ndarray         # (runs, scans)
    runtimes: dict[str, float]
    steady_state_start: int

    @property
    def n_runs(self) -> int:
        return self.true_cardinality.shape[0]

    @property
    def n_scans(self) -> int:
        return self.true_cardinality.shape[1]

    def steady_slice(self) -> slice:
        return slice(self.steady_state_start - 1, self.n_scans)

    def steady_run_means(self, pipeline: str) -> np.ndarray:
        """Per-run mean OSPA over the steady-state scans."""
        return self.ospa[pipeline][:, self.steady_slice()].mean(axis=1)

    def steady_mean_ospa(self, pipeline: str) -> float:
        return float(self.steady_run_means(pipeline).mean())

    def steady_mean_cardinality(self, pipeline: str) -> float:
        return float(self.cardinality[pipeline][:, self.steady_slice()].mean())

    def steady_true_cardinality(self) -> float:
        return float(self.true_cardinality[:, self.steady_slice()].mean())


def _worker(args):
    scenario, settings, weight_map, run = args
    return run_single(scenario, settings, weight_map, run)


def resolve_threads() -> int:
    value = os.environ.get(THREADS_ENV_VAR)
    if value:
        return max(1, int(value))
    return min(os.cpu_count() or 1, 8)


def run_monte_carlo(scenario: Scenario, settings: PipelineSettings,
                    runs: int, weight_map: WeightMap | None = None,
                    clustering_log: list | None = None) -> McResult:
    """Independent seeded runs; deterministic given (scenario, settings).

    Runs execute in a process pool capped by RFS_FUSE_THREADS (results
    are aggregated in run order, so parallelism never changes output).
    The optional clustering log records run 0 only.
    """
    if runs < 1:
        raise ValueError("runs must be >= 1")
    validate_pipelines(settings.pipelines, len(scenario.sensors))
    if weight_map is None:
        weight_map = build_weight_map(scenario.sensors, settings.partition,
                                      settings.euf)
    threads = resolve_threads()
    results = [None] * runs
    if clustering_log is not None and runs >= 1:
        results[0] = run_single(scenario, settings, weight_map, 0, clustering_log)
    pending = [r for r in range(runs) if results[r] is None]
    if threads > 1 and len(pending) > 1:
        payloads = [(scenario, settings, weight_map, r) for r in pending]
        with ProcessPoolExecutor(max_workers=threads) as pool:
            for r, res in zip(pending, pool.map(_worker, payloads)):
                results[r] = res
    else:
        for r in pending:
            results[r] = run_single(scenario, settings, weight_map, r)

    ospa_arr = {p: np.stack([res["ospa"][p] for res in results])
                for p in settings.pipelines}
    card_arr = {p: np.stack([res["cardinality"][p] for res in results])
                for p in settings.pipelines}
    true_card = np.stack([res["true_cardinality"] for res in results])
    runtimes: dict[str, float] = {}
    for res in results:
        for key, val in res["runtimes"].items():
            runtimes[key] = runtimes.get(key, 0.0) + val
    return McResult(settings.pipelines, ospa_arr, card_arr, true_card,
                    runtimes, settings.steady_state_start)
