"""Sparse 2D probability grids over endpoint positions.

A heatmap discretizes the distribution of an agent's position at the
prediction horizon onto a regular grid. Cells are stored sparsely as
(row-major index, probability) pairs, always sorted by index so that every
downstream computation is independent of the storage order of the input.

The spread statistic computed by :func:`uncertainty` is the trace of the
positional covariance of the distribution, in m^2. It is the quantity the
sampling radius is calibrated against.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

__all__ = [
    "GridSpec",
    "Heatmap",
    "GaussianMode",
    "MixtureSpec",
    "UncertaintyEstimate",
    "ZeroMassError",
    "EmptyRenderError",
    "normalize",
    "expectation",
    "uncertainty",
    "render_mixture",
    "threshold_sparsify",
    "heatmap_to_dict",
    "heatmap_from_dict",
]

NORMALIZATION_TOL = 1e-6


class ZeroMassError(ValueError):
    """Heatmap carries no positive probability mass."""


class EmptyRenderError(ValueError):
    """Mixture rendering produced no cells with mass."""


@dataclass(frozen=True)
class GridSpec:
    """Regular 2D grid. ``origin_x/origin_y`` locate the center of cell (0,0);
    cell (row, col) has center (origin_x + col*resolution, origin_y + row*resolution)
    and row-major index row*width + col."""

    origin_x: float
    origin_y: float
    resolution: float
    width: int
    height: int

    def __post_init__(self):
        if self.resolution <= 0:
            raise ValueError("resolution must be positive")
        if self.width < 1 or self.height < 1:
            raise ValueError("grid must have at least one cell per axis")

    @property
    def n_cells(self) -> int:
        return self.width * self.height

    def cell_centers(self, indices: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Metric coordinates of the given row-major cell indices."""
        cols = indices % self.width
        rows = indices // self.width
        xs = self.origin_x + cols.astype(np.float64) * self.resolution
        ys = self.origin_y + rows.astype(np.float64) * self.resolution
        return xs, ys

    def bbox_center(self) -> tuple[float, float]:
        cx = self.origin_x + 0.5 * (self.width - 1) * self.resolution
        cy = self.origin_y + 0.5 * (self.height - 1) * self.resolution
        return cx, cy


@dataclass(eq=False)
class Heatmap:
    """Sparse cell probabilities on a :class:`GridSpec`.

    ``idx`` is int64 and strictly increasing, ``prob`` is float64 and
    non-negative. Instances are immutable after construction (arrays are
    marked read-only), so they are safe to share across workers.
    """

    grid: GridSpec
    idx: np.ndarray
    prob: np.ndarray

    def __post_init__(self):
        idx = np.asarray(self.idx, dtype=np.int64).copy()
        prob = np.asarray(self.prob, dtype=np.float64).copy()
        if idx.ndim != 1 or prob.ndim != 1 or idx.shape != prob.shape:
            raise ValueError("idx and prob must be 1-D arrays of equal length")
        order = np.argsort(idx, kind="stable")
        idx = idx[order]
        prob = prob[order]
        if idx.size and (idx[0] < 0 or idx[-1] >= self.grid.n_cells):
            raise ValueError("cell index out of grid bounds")
        if idx.size > 1 and np.any(np.diff(idx) == 0):
            raise ValueError("duplicate cell indices")
        if not np.all(np.isfinite(prob)):
            raise ValueError("probabilities must be finite")
        if np.any(prob < 0):
            raise ValueError("probabilities must be non-negative")
        idx.setflags(write=False)
        prob.setflags(write=False)
        object.__setattr__(self, "idx", idx)
        object.__setattr__(self, "prob", prob)

    @classmethod
    def from_cells(cls, grid: GridSpec, cells: Mapping[int, float] | Iterable[tuple[int, float]]) -> "Heatmap":
        if isinstance(cells, Mapping):
            items = list(cells.items())
        else:
            items = list(cells)
        idx = np.array([int(i) for i, _ in items], dtype=np.int64)
        prob = np.array([float(p) for _, p in items], dtype=np.float64)
        return cls(grid, idx, prob)

    def __len__(self) -> int:
        return int(self.idx.size)

    @property
    def total_mass(self) -> float:
        return float(np.sum(self.prob))

    @property
    def is_normalized(self) -> bool:
        return abs(self.total_mass - 1.0) <= NORMALIZATION_TOL

    def cell_centers(self) -> tuple[np.ndarray, np.ndarray]:
        return self.grid.cell_centers(self.idx)


class UncertaintyEstimate:
    """Spread (m^2) and mean position of a heatmap distribution."""

    __slots__ = ("spread", "mean")

    def __init__(self, spread: float, mean: tuple[float, float]):
        self.spread = float(spread)
        self.mean = (float(mean[0]), float(mean[1]))

    def __repr__(self) -> str:
        return f"UncertaintyEstimate(spread={self.spread!r}, mean={self.mean!r})"


@dataclass(frozen=True)
class GaussianMode:
    weight: float
    mean_x: float
    mean_y: float
    sigma: float


@dataclass(frozen=True)
class MixtureSpec:
    """Isotropic Gaussian mixture used as a synthetic endpoint distribution."""

    modes: tuple[GaussianMode, ...]

    def __post_init__(self):
        if not self.modes:
            raise ValueError("mixture needs at least one mode")
        for m in self.modes:
            if m.weight <= 0:
                raise ValueError("mode weights must be positive")
            if m.sigma <= 0:
                raise ValueError("mode sigmas must be positive")
        total = math.fsum(m.weight for m in self.modes)
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"mode weights must sum to 1, got {total}")


def _require_normalized(h: Heatmap, op: str) -> None:
    if len(h) == 0:
        raise ZeroMassError(f"{op}: heatmap has no cells")
    if not h.is_normalized:
        raise ValueError(f"{op}: heatmap must be normalized first (mass={h.total_mass})")


def normalize(h: Heatmap) -> Heatmap:
    """Scale probabilities to unit mass and drop cells left with zero mass."""
    total = float(np.sum(h.prob))
    if not total > 0:
        raise ZeroMassError("cannot normalize a heatmap with no positive mass")
    prob = h.prob / total
    keep = prob > 0
    return Heatmap(h.grid, h.idx[keep], prob[keep])


def _moments(h: Heatmap) -> tuple[float, float, float]:
    # Coordinates are shifted to the grid bounding-box center before the
    # accumulation so the quadratic sums stay small; this keeps the spread
    # stable (and bit-identical under exact-float origin shifts).
    xs, ys = h.cell_centers()
    cx, cy = h.grid.bbox_center()
    dx = xs - cx
    dy = ys - cy
    s = float(np.sum(h.prob))
    ex = float(np.dot(h.prob, dx)) / s
    ey = float(np.dot(h.prob, dy)) / s
    exx = float(np.dot(h.prob, dx * dx)) / s
    eyy = float(np.dot(h.prob, dy * dy)) / s
    spread = max((exx - ex * ex) + (eyy - ey * ey), 0.0)
    return cx + ex, cy + ey, spread


def expectation(h: Heatmap) -> tuple[float, float]:
    """Probability-weighted mean of the cell-center positions."""
    _require_normalized(h, "expectation")
    ex, ey, _ = _moments(h)
    return ex, ey


def uncertainty(h: Heatmap) -> UncertaintyEstimate:
    """Spread of the distribution: sum of H(p) * squared distance to the mean.

    Equals the trace of the 2x2 positional covariance, so it is invariant
    under translation and rotation of the cell coordinates.
    """
    _require_normalized(h, "uncertainty")
    ex, ey, spread = _moments(h)
    return UncertaintyEstimate(spread, (ex, ey))


def render_mixture(m: MixtureSpec, g: GridSpec, truncate_sigmas: float = 4.0) -> Heatmap:
    """Discretize an isotropic-Gaussian mixture onto a grid.

    Every cell within ``truncate_sigmas * sigma`` of at least one mode center
    receives the full mixture density at its cell center times resolution^2;
    all other cells are omitted. The result is normalized. Warns if the grid
    does not cover some mode's truncation disc.
    """
    if truncate_sigmas < 3.0:
        raise ValueError("truncate_sigmas must be at least 3")
    res = g.resolution
    cand: list[np.ndarray] = []
    clipped = False
    for mode in m.modes:
        reach = truncate_sigmas * mode.sigma
        lo_col = math.ceil((mode.mean_x - reach - g.origin_x) / res)
        hi_col = math.floor((mode.mean_x + reach - g.origin_x) / res)
        lo_row = math.ceil((mode.mean_y - reach - g.origin_y) / res)
        hi_row = math.floor((mode.mean_y + reach - g.origin_y) / res)
        if lo_col < 0 or lo_row < 0 or hi_col > g.width - 1 or hi_row > g.height - 1:
            clipped = True
        lo_col = max(lo_col, 0)
        lo_row = max(lo_row, 0)
        hi_col = min(hi_col, g.width - 1)
        hi_row = min(hi_row, g.height - 1)
        if lo_col > hi_col or lo_row > hi_row:
            continue
        cols = np.arange(lo_col, hi_col + 1, dtype=np.int64)
        rows = np.arange(lo_row, hi_row + 1, dtype=np.int64)
        cc, rr = np.meshgrid(cols, rows)
        xs = g.origin_x + cc.astype(np.float64) * res
        ys = g.origin_y + rr.astype(np.float64) * res
        d2 = (xs - mode.mean_x) ** 2 + (ys - mode.mean_y) ** 2
        inside = d2 <= reach * reach
        cand.append((rr[inside] * g.width + cc[inside]).ravel())
    if clipped:
        warnings.warn("grid does not cover the full truncation disc of every mode", stacklevel=2)
    if not cand:
        raise EmptyRenderError("no grid cell lies within the truncation disc of any mode")
    idx = np.unique(np.concatenate(cand))
    xs, ys = g.cell_centers(idx)
    dens = np.zeros(idx.shape[0], dtype=np.float64)
    for mode in m.modes:
        d2 = (xs - mode.mean_x) ** 2 + (ys - mode.mean_y) ** 2
        var = mode.sigma * mode.sigma
        dens += (mode.weight / (2.0 * math.pi * var)) * np.exp(-0.5 * d2 / var)
    dens *= res * res
    if not float(np.sum(dens)) > 0:
        raise EmptyRenderError("rendered mixture carries no mass on the grid")
    return normalize(Heatmap(g, idx, dens))


def threshold_sparsify(h: Heatmap, min_prob: float) -> tuple[Heatmap, float]:
    """Drop cells with probability below ``min_prob`` and renormalize.

    Returns the sparsified heatmap and the total mass that was dropped.
    """
    if len(h) == 0:
        raise ZeroMassError("threshold_sparsify: heatmap has no cells")
    pmax = float(np.max(h.prob))
    if not 0 <= min_prob < pmax:
        raise ValueError(f"min_prob must lie in [0, max cell probability={pmax})")
    keep = h.prob >= min_prob
    dropped = float(np.sum(h.prob[~keep]))
    if dropped == 0.0:
        return h, 0.0
    return normalize(Heatmap(h.grid, h.idx[keep], h.prob[keep])), dropped


def heatmap_to_dict(h: Heatmap, sample_id: str) -> dict:
    """JSON-ready form: grid spec plus [index, probability] cell pairs."""
    return {
        "sample_id": sample_id,
        "grid": {
            "origin_x": h.grid.origin_x,
            "origin_y": h.grid.origin_y,
            "resolution": h.grid.resolution,
            "width": h.grid.width,
            "height": h.grid.height,
        },
        "cells": [[int(i), float(p)] for i, p in zip(h.idx, h.prob)],
    }


def heatmap_from_dict(d: dict, renormalize: bool = True) -> tuple[str, Heatmap]:
    """Parse the JSON form. Probabilities are normalized on read by default."""
    g = d["grid"]
    grid = GridSpec(
        origin_x=float(g["origin_x"]),
        origin_y=float(g["origin_y"]),
        resolution=float(g["resolution"]),
        width=int(g["width"]),
        height=int(g["height"]),
    )
    cells = d["cells"]
    idx = np.array([c[0] for c in cells], dtype=np.int64)
    prob = np.array([c[1] for c in cells], dtype=np.float64)
    h = Heatmap(grid, idx, prob)
    if renormalize:
        h = normalize(h)
    return str(d["sample_id"]), h
