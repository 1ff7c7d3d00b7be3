"""Figure rendering for experiment results.

Renders OSPA/cardinality curves per filter family and per-sensor weight
intensity maps to PNG files next to the delimited output.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .sim import McResult
from .weights import WeightMap

__all__ = ["save_result_figures", "save_weight_map_figures"]


def _family(pipelines, kind):
    if kind == "phd":
        return [p for p in pipelines
                if p.startswith("local:") or p in ("waa-phd", "hmphd")]
    return [p for p in pipelines if p in ("waa-mb", "hmmb")]


def _style(pipeline):
    if pipeline.startswith("local:"):
        return {"color": "0.7", "lw": 0.8}
    return {"waa-phd": {"color": "tab:blue", "lw": 1.6},
            "hmphd": {"color": "tab:red", "lw": 1.6},
            "waa-mb": {"color": "tab:blue", "lw": 1.6},
            "hmmb": {"color": "tab:red", "lw": 1.6}}[pipeline]


def save_result_figures(result: McResult, out_dir) -> list[Path]:
    """OSPA and cardinality curves, one figure per filter family."""
    out_dir = Path(out_dir)
    scans = np.arange(1, result.n_scans + 1)
    true_card = result.true_cardinality.mean(axis=0)
    written = []
    for kind in ("phd", "mb"):
        members = _family(result.pipelines, kind)
        if not members:
            continue
        fig, ax = plt.subplots(figsize=(7, 4))
        for p in members:
            ax.plot(scans, result.ospa[p].mean(axis=0), label=p, **_style(p))
        ax.set_xlabel("scan")
        ax.set_ylabel("OSPA [m]")
        ax.set_title(f"OSPA vs time ({kind.upper()} family)")
        ax.legend(fontsize=8, ncol=2)
        ax.grid(alpha=0.3)
        path = out_dir / f"ospa_{kind}.png"
        fig.savefig(path, dpi=130, bbox_inches="tight")
        plt.close(fig)
        written.append(path)

        fig, ax = plt.subplots(figsize=(7, 4))
        ax.plot(scans, true_card, "k--", lw=1.2, label="true")
        for p in members:
            ax.plot(scans, result.cardinality[p].mean(axis=0), label=p, **_style(p))
        ax.set_xlabel("scan")
        ax.set_ylabel("mean cardinality")
        ax.set_title(f"Cardinality vs time ({kind.upper()} family)")
        ax.legend(fontsize=8, ncol=2)
        ax.grid(alpha=0.3)
        path = out_dir / f"cardinality_{kind}.png"
        fig.savefig(path, dpi=130, bbox_inches="tight")
        plt.close(fig)
        written.append(path)
    return written


def save_weight_map_figures(weight_map: WeightMap, out_dir,
                            sensors=None) -> list[Path]:
    """Per-sensor heat maps of the heterogeneous fusion weights."""
    out_dir = Path(out_dir)
    part = weight_map.partition
    nx, ny = part.dims
    extent = [part.bounds[0, 0], part.bounds[0, 1],
              part.bounds[1, 0], part.bounds[1, 1]]
    written = []
    for i in range(weight_map.n_sensors):
        grid = weight_map.weights[i].reshape(nx, ny)
        fig, ax = plt.subplots(figsize=(5, 4.2))
        im = ax.imshow(grid.T, origin="lower", extent=extent, vmin=0.0,
                       vmax=1.0, cmap="viridis", aspect="equal")
        if sensors is not None:
            for s in sensors:
                ax.plot(*s.position, "r^", ms=6)
            ax.plot(*sensors[i].position, "w^", ms=8, mec="r")
        ax.set_xlabel("x [m]")
        ax.set_ylabel("y [m]")
        ax.set_title(f"fusion weight, sensor {i}")
        fig.colorbar(im, ax=ax, shrink=0.85)
        path = out_dir / f"weight_map_sensor_{i}.png"
        fig.savefig(path, dpi=130, bbox_inches="tight")
        plt.close(fig)
        written.append(path)
    return written
