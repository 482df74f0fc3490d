"""
boxdim.py — Box-counting dimension by log-log least squares.

Boxes are cells of an axis-aligned grid of pitch ``box_size`` anchored at a
fixed corner (no anchor averaging). Snowflake sizes halve from 1/8 of the
bounding-box diameter down to half the longest polygon edge, counting the
level-m polygon itself. Julia raster sizes are whole powers of two pixels,
from two pixels up to 1/32 of the boundary diameter, on a grid aligned with
the pixels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from fractaldrum.errors import FractalDrumError, InvalidConfigError
from fractaldrum.geometry import SnowflakeSpec, snowflake_polygon
from fractaldrum.julia import (
    DEFAULT_PIXEL_BUDGET,
    JuliaSpec,
    RasterGrid,
    boundary_cells,
    rasterize_filled,
)

PointSource = Union[np.ndarray, RasterGrid]

# points placed on every polygon edge, so boxes smaller than an edge see it
EDGE_SAMPLES = 8
# largest raster box as a fraction of the boundary diameter
RASTER_LARGEST_FRACTION = 1.0 / 32.0


# ---------------------------------------------------------------------------
# Data model
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class BoxCountSeries:
    """Strictly decreasing ``sizes`` with the occupied-box ``counts`` at each."""

    sizes: np.ndarray
    counts: np.ndarray

    def __post_init__(self):
        if self.sizes.shape != self.counts.shape:
            raise InvalidConfigError("sizes and counts differ in length")
        if self.sizes.size > 1 and np.any(np.diff(self.sizes) >= 0):
            raise InvalidConfigError("box sizes must be strictly decreasing")
        if np.any(self.counts < 1):
            raise InvalidConfigError("box counts must be positive")


@dataclass(frozen=True)
class LogLogFit:
    dimension: float
    intercept: float
    fit_error: float   # RMS residual in log-log coordinates


# ---------------------------------------------------------------------------
# Counting
# ---------------------------------------------------------------------------


def _as_points(source: PointSource) -> np.ndarray:
    if isinstance(source, RasterGrid):
        return source.filled_centers()
    pts = np.asarray(source, dtype=float)
    return pts.reshape(-1, 2)


def default_anchor(points: np.ndarray) -> np.ndarray:
    return points.min(axis=0)


def count_boxes(
    source: PointSource,
    box_size: float,
    anchor: Optional[Sequence[float]] = None,
) -> int:
    """
    Number of grid cells of pitch ``box_size`` holding at least one point.

    The grid covers [anchor, anchor + n * box_size] per axis with n the
    smallest whole number of cells reaching the far extent; points on that
    far edge belong to the last cell, so closed intervals are counted as
    covers (the unit segment needs 4 boxes of side 1/4, not 5).
    """
    if not box_size > 0:
        raise InvalidConfigError(f"box size must be > 0, got {box_size}")
    pts = _as_points(source)
    if pts.shape[0] == 0:
        raise InvalidConfigError("cannot count boxes of an empty point set")
    origin = default_anchor(pts) if anchor is None else np.asarray(anchor, dtype=float)

    rel = (pts - origin) / box_size
    extent = rel.max(axis=0)
    ncells = np.maximum(1, np.ceil(extent - 1e-9)).astype(np.int64)
    idx = np.clip(np.floor(rel).astype(np.int64), 0, ncells - 1)
    keys = idx[:, 0] * (int(ncells[1]) + 1) + idx[:, 1]
    return int(np.unique(keys).size)


def box_sizes(diameter: float, finest: float, ratio: float = 0.5) -> np.ndarray:
    """Geometric schedule from diameter/8 down to (not below) ``finest``."""
    if not (diameter > 0 and finest > 0):
        raise InvalidConfigError("diameter and finest box size must be > 0")
    largest = diameter / 8.0
    if finest > largest:
        raise InvalidConfigError(
            f"finest box {finest:.3g} is larger than the largest {largest:.3g}"
        )
    n = int(math.floor(math.log(finest / largest) / math.log(ratio) + 1e-9)) + 1
    return largest * ratio ** np.arange(n)


def pixel_box_sizes(pixel_size: float, diameter: float) -> np.ndarray:
    """2, 4, 8, ... pixels, up to RASTER_LARGEST_FRACTION of ``diameter``; largest first."""
    if not (pixel_size > 0 and diameter > 0):
        raise InvalidConfigError("pixel size and diameter must be > 0")
    largest = diameter * RASTER_LARGEST_FRACTION
    n = int(math.floor(math.log2(largest / pixel_size) + 1e-9))
    return pixel_size * 2.0 ** np.arange(n, 0, -1)


def sample_edges(vertices: np.ndarray, per_edge: int = EDGE_SAMPLES) -> np.ndarray:
    """``per_edge`` evenly spaced points on every edge of a closed polygon, vertices included."""
    v = np.asarray(vertices, dtype=float)
    d = np.roll(v, -1, axis=0) - v
    t = np.arange(per_edge) / per_edge
    return (v[:, None, :] + t[None, :, None] * d[:, None, :]).reshape(-1, 2)


def count_series(
    source: PointSource,
    sizes: Sequence[float],
    anchor: Optional[Sequence[float]] = None,
) -> BoxCountSeries:
    pts = _as_points(source)
    origin = default_anchor(pts) if anchor is None else anchor
    sizes_arr = np.asarray(sizes, dtype=float)
    counts = np.array([count_boxes(pts, s, origin) for s in sizes_arr], dtype=np.int64)
    return BoxCountSeries(sizes=sizes_arr, counts=counts)


# ---------------------------------------------------------------------------
# Fitting
# ---------------------------------------------------------------------------


def fit_dimension(series: BoxCountSeries) -> LogLogFit:
    """Ordinary least squares of log(count) on log(1/size); slope = dimension."""
    if series.sizes.size < 3:
        raise InvalidConfigError(f"need at least 3 box sizes, got {series.sizes.size}")
    x = -np.log(series.sizes)
    y = np.log(series.counts.astype(float))
    if np.ptp(x) == 0.0:
        raise InvalidConfigError("degenerate box sizes: all equal")
    A = np.column_stack((x, np.ones_like(x)))
    (slope, intercept), *_ = np.linalg.lstsq(A, y, rcond=None)
    residual = y - (slope * x + intercept)
    rms = float(np.sqrt(np.mean(residual ** 2)))
    return LogLogFit(dimension=float(slope), intercept=float(intercept), fit_error=rms)


# ---------------------------------------------------------------------------
# Pipelines
# ---------------------------------------------------------------------------


def snowflake_dimension(spec: SnowflakeSpec) -> Tuple[BoxCountSeries, LogLogFit]:
    """
    Fit on the level-m snowflake polygon, its edges densely sampled.

    Boxes go down to half the longest level-m edge. Too low a level leaves
    fewer than 3 sizes and is rejected by ``fit_dimension``.
    """
    spec.validate()
    polygon = snowflake_polygon(spec)
    edge = float(polygon.edge_lengths().max())
    xmin, xmax, ymin, ymax = polygon.bounds()
    diameter = math.hypot(xmax - xmin, ymax - ymin)
    sizes = box_sizes(diameter, 0.5 * edge)
    points = sample_edges(polygon.vertices)
    series = count_series(points, sizes, anchor=(xmin, ymin))
    return series, fit_dimension(series)


def raster_dimension(grid: RasterGrid) -> Tuple[BoxCountSeries, LogLogFit]:
    """
    Fit on the boundary cells of a filled raster.

    Box edges sit on pixel edges, half a pixel below the lowest boundary
    centre, so every box holds whole pixels.
    """
    boundary = boundary_cells(grid)
    pts = boundary.filled_centers()
    if pts.shape[0] == 0:
        raise InvalidConfigError("raster has no boundary pixels")
    h = boundary.pixel_size
    lo = pts.min(axis=0)
    hi = pts.max(axis=0)
    diameter = float(np.hypot(*(hi - lo)))
    sizes = pixel_box_sizes(h, diameter)
    series = count_series(pts, sizes, anchor=lo - 0.5 * h)
    return series, fit_dimension(series)


def julia_dimension(
    spec: JuliaSpec,
    pixel_budget: int = DEFAULT_PIXEL_BUDGET,
) -> Tuple[BoxCountSeries, LogLogFit]:
    return raster_dimension(rasterize_filled(spec, pixel_budget=pixel_budget))


@dataclass
class SweepRow:
    c: complex
    resolution_px: Tuple[int, int]
    dimension: Optional[float]
    fit_error: Optional[float]
    error: str = ""


# The image sizes of the multi-resolution study, 640x480 up to 5120x3840.
STANDARD_IMAGE_SIZES: Tuple[Tuple[int, int], ...] = tuple((640 * k, 480 * k) for k in range(1, 9))

_SWEEP_BBOX = (-2.0, 2.0, -1.5, 1.5)


def dimension_sweep(
    c_values: Sequence[complex],
    resolutions: Sequence[Tuple[int, int]],
    max_iter: int = 200,
    pixel_budget: int = DEFAULT_PIXEL_BUDGET,
) -> List[SweepRow]:
    """
    One fit per (c, image size), rows in input order (c outer).

    Images cover [-2, 2] x [-1.5, 1.5], so a W x H image has W/4 pixels per
    unit length. A failing cell becomes a row with ``error`` set.
    """
    if not c_values or not resolutions:
        raise InvalidConfigError("dimension sweep needs at least one c and one image size")
    rows: List[SweepRow] = []
    for c in c_values:
        for width, height in resolutions:
            res = width / (_SWEEP_BBOX[1] - _SWEEP_BBOX[0])
            spec = JuliaSpec(c=c, max_iter=max_iter, resolution=res, bbox=_SWEEP_BBOX)
            try:
                _, fit = julia_dimension(spec, pixel_budget)
                rows.append(SweepRow(c, (width, height), fit.dimension, fit.fit_error))
            except FractalDrumError as exc:
                rows.append(SweepRow(c, (width, height), None, None, error=str(exc)))
    return rows
