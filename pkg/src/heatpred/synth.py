"""Deterministic synthetic scenario generator.

Produces (heatmap, ground-truth endpoint) pairs from random isotropic
Gaussian mixtures. The ground truth is drawn from the same continuous
mixture the heatmap discretizes, so the heatmap is a perfectly calibrated
predictor and any evaluation differences come from the sampling and
calibration machinery, not model error.

Every scenario is a pure function of (seed, index): each index gets its own
counter-derived random substream, so generation order and parallel fan-out
do not change the data.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .heatmap import GaussianMode, GridSpec, Heatmap, MixtureSpec, heatmap_to_dict, render_mixture
from .io import canonical_dumps, config_hash

__all__ = [
    "ScenarioConfig",
    "default_grid",
    "draw_mixture",
    "sample_scenario",
    "generate_dataset",
]


def default_grid() -> GridSpec:
    # covers the default mean region plus a 4-sigma reach of the widest mode
    return GridSpec(origin_x=-25.0, origin_y=-45.0, resolution=0.5, width=224, height=184)


@dataclass(frozen=True)
class ScenarioConfig:
    """Distribution the scenario generator draws mixtures from."""

    n_modes_range: tuple[int, int] = (1, 4)
    mean_region: tuple[tuple[float, float], tuple[float, float]] = ((0.0, 60.0), (-20.0, 20.0))
    sigma_range: tuple[float, float] = (0.5, 6.0)
    weight_floor: float = 0.1
    grid: GridSpec = field(default_factory=default_grid)
    seed: int = 0
    truncate_sigmas: float = 4.0

    def __post_init__(self):
        lo, hi = self.n_modes_range
        if not 1 <= lo <= hi:
            raise ValueError("n_modes_range must be a non-empty range of counts >= 1")
        if self.sigma_range[0] <= 0 or self.sigma_range[1] < self.sigma_range[0]:
            raise ValueError("sigma_range must be positive and non-empty")
        if self.weight_floor < 0 or self.weight_floor * hi > 1:
            raise ValueError("weight_floor * max modes must not exceed 1")
        (x0, x1), (y0, y1) = self.mean_region
        if x1 < x0 or y1 < y0:
            raise ValueError("mean_region must be a non-empty rectangle")

    def to_dict(self) -> dict:
        g = self.grid
        return {
            "n_modes_range": list(self.n_modes_range),
            "mean_region": [list(self.mean_region[0]), list(self.mean_region[1])],
            "sigma_range": list(self.sigma_range),
            "weight_floor": self.weight_floor,
            "grid": {
                "origin_x": g.origin_x,
                "origin_y": g.origin_y,
                "resolution": g.resolution,
                "width": g.width,
                "height": g.height,
            },
            "seed": self.seed,
            "truncate_sigmas": self.truncate_sigmas,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioConfig":
        kwargs = {}
        if "n_modes_range" in d:
            kwargs["n_modes_range"] = tuple(d["n_modes_range"])
        if "mean_region" in d:
            kwargs["mean_region"] = (tuple(d["mean_region"][0]), tuple(d["mean_region"][1]))
        if "sigma_range" in d:
            kwargs["sigma_range"] = tuple(d["sigma_range"])
        for key in ("weight_floor", "seed", "truncate_sigmas"):
            if key in d:
                kwargs[key] = d[key]
        if "grid" in d:
            kwargs["grid"] = GridSpec(
                origin_x=float(d["grid"]["origin_x"]),
                origin_y=float(d["grid"]["origin_y"]),
                resolution=float(d["grid"]["resolution"]),
                width=int(d["grid"]["width"]),
                height=int(d["grid"]["height"]),
            )
        return cls(**kwargs)


def _rng_for(cfg: ScenarioConfig, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=(cfg.seed, index)))


def draw_mixture(cfg: ScenarioConfig, index: int) -> tuple[MixtureSpec, tuple[float, float]]:
    """Draw the mixture and a ground-truth endpoint for one scenario index."""
    rng = _rng_for(cfg, index)
    lo, hi = cfg.n_modes_range
    n = int(rng.integers(lo, hi + 1))
    raw = rng.dirichlet(np.ones(n))
    weights = cfg.weight_floor + (1.0 - n * cfg.weight_floor) * raw
    (x0, x1), (y0, y1) = cfg.mean_region
    means_x = rng.uniform(x0, x1, n)
    means_y = rng.uniform(y0, y1, n)
    sigmas = rng.uniform(cfg.sigma_range[0], cfg.sigma_range[1], n)
    modes = tuple(
        GaussianMode(weight=float(w / weights.sum()), mean_x=float(mx), mean_y=float(my), sigma=float(s))
        for w, mx, my, s in zip(weights, means_x, means_y, sigmas)
    )
    mix = MixtureSpec(modes)
    pick = int(rng.choice(n, p=np.array([m.weight for m in modes])))
    offset = rng.standard_normal(2) * modes[pick].sigma
    gt = (modes[pick].mean_x + float(offset[0]), modes[pick].mean_y + float(offset[1]))
    return mix, gt


def sample_scenario(cfg: ScenarioConfig, index: int) -> tuple[Heatmap, tuple[float, float], MixtureSpec]:
    """Render scenario ``index``: returns (heatmap, gt endpoint, mixture)."""
    mix, gt = draw_mixture(cfg, index)
    h = render_mixture(mix, cfg.grid, cfg.truncate_sigmas)
    return h, gt, mix


def scenario_id(index: int) -> str:
    return f"synth-{index:06d}"


def generate_dataset(cfg: ScenarioConfig, n: int, out_dir) -> dict[str, Path]:
    """Write ``n`` scenarios as heatmap and ground-truth JSONL plus a manifest.

    Regenerating with the same config produces byte-identical files.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "heatmaps": out / "heatmaps.jsonl",
        "ground_truth": out / "ground_truth.jsonl",
        "manifest": out / "manifest.json",
    }
    cfg_dict = cfg.to_dict()
    try:
        with open(paths["heatmaps"], "w") as hf, open(paths["ground_truth"], "w") as gf:
            for i in range(n):
                h, gt, _ = sample_scenario(cfg, i)
                sid = scenario_id(i)
                hf.write(canonical_dumps(heatmap_to_dict(h, sid)) + "\n")
                gf.write(canonical_dumps({"sample_id": sid, "gt": [gt[0], gt[1]]}) + "\n")
        manifest = {"config": cfg_dict, "config_hash": config_hash(cfg_dict), "n": n}
        paths["manifest"].write_text(canonical_dumps(manifest, indent=2) + "\n")
    except OSError as e:
        raise OSError(f"failed writing dataset under {out}: {e}") from e
    return paths
