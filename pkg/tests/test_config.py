"""Scenario config parsing and validation."""

import numpy as np
import pytest

from rfsfuse.config import (
    BUNDLED_CONFIGS,
    config_from_dict,
    default_delta_epsilon,
    load_bundled,
    validate_raw,
)
from rfsfuse.weights import EufParams


def minimal_raw():
    return {
        "name": "mini",
        "duration_scans": 10,
        "region_bounds": [[-1000.0, 1000.0], [-1000.0, 1000.0]],
        "seed": 1,
        "runs": 1,
        "sensors": [{"position": [-310.0, 0.0], "range_tiers": [500.0, 800.0, 1200.0]}],
        "tracks": [{"birth_scan": 1, "death_scan": 10,
                    "initial_state": [0.0, 100.0, 1.0, 0.0]}],
        "birth": {"locations": [[0.0, 100.0]]},
        "partition": {"dims": [20, 20]},
        "pipelines": ["local:0", "hmphd"],
    }


class TestLoadConfig:
    @pytest.mark.parametrize("name", BUNDLED_CONFIGS)
    def test_bundled_configs_load(self, name):
        cfg = load_bundled(name)
        assert len(cfg.scenario.sensors) == 6
        assert len(cfg.scenario.tracks) == 12
        assert cfg.scenario.duration_scans == 80
        assert cfg.runs == 20
        assert cfg.settings.partition.n_cells == 100 * 100

    def test_bundled_unknown_name(self):
        with pytest.raises(ValueError):
            load_bundled("case99")

    def test_minimal_dict(self):
        cfg = config_from_dict(minimal_raw())
        assert cfg.name == "mini"
        assert cfg.settings.pipelines == ("local:0", "hmphd")
        assert cfg.settings.ospa.cutoff == 100.0

    def test_sigma_theta_degrees_converted(self):
        raw = minimal_raw()
        raw["sensors"][0]["sigma_theta_deg"] = 3.0
        cfg = config_from_dict(raw)
        assert cfg.scenario.sensors[0].sigma_theta == pytest.approx(np.deg2rad(3.0))

    def test_delta_epsilon_defaulted(self):
        cfg = config_from_dict(minimal_raw())
        sensor = cfg.scenario.sensors[0]
        expected = default_delta_epsilon(sensor, EufParams(1.0, 800.0))
        assert cfg.settings.mb_fusion.delta_epsilon == pytest.approx(expected)

    def test_case2_sensors_cover_region(self):
        cfg = load_bundled("case2")
        corners = [np.array([x, y, 0.0, 0.0])
                   for x in (-2500.0, 2500.0) for y in (-2500.0, 2500.0)]
        for s in cfg.scenario.sensors:
            assert all(s.distance(c) <= s.fov_max for c in corners)
            assert s.tier_pd == (0.98, 0.98, 0.98)


class TestValidateRaw:
    def test_valid(self):
        assert validate_raw(minimal_raw()) == []

    def test_birth_after_death(self):
        raw = minimal_raw()
        raw["tracks"][0]["birth_scan"] = 10
        raw["tracks"][0]["death_scan"] = 5
        assert any("birth_scan" in p for p in validate_raw(raw))

    def test_tier_ordering_violation(self):
        raw = minimal_raw()
        raw["sensors"][0]["range_tiers"] = [1300.0, 800.0, 1200.0]
        assert any("sensor 0" in p for p in validate_raw(raw))

    def test_track_outside_region(self):
        raw = minimal_raw()
        raw["tracks"][0]["initial_state"] = [5000.0, 0.0, 0.0, 0.0]
        assert any("outside" in p for p in validate_raw(raw))

    def test_unknown_pipeline(self):
        raw = minimal_raw()
        raw["pipelines"] = ["warp-drive"]
        assert any("warp-drive" in p for p in validate_raw(raw))

    def test_missing_key(self):
        raw = minimal_raw()
        del raw["sensors"]
        assert any("sensors" in p for p in validate_raw(raw))
