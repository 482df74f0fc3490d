"""
julia.py — Filled Julia sets of z^2 + c on pixel grids.

Escape-time rasterisation, pixel-count areas, Mandelbrot membership and the
raster topology used downstream: interior components (quasicircles) and
boundary cells.

Escape convention: the orbit z, p(z), p^2(z), ... is inspected term by term
and the escape count is the 1-based position of the first term with
modulus > R. ``max_iter`` is the number of terms inspected, so the
``max_iter``-iteration domain is {z : |p^k(z)| <= R for k < max_iter}.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import ndimage

from fractaldrum.errors import BudgetExceededError, FractalDrumError, InvalidConfigError, MeshError

# ---------------------------------------------------------------------------
# Named parameters
# ---------------------------------------------------------------------------

BASILICA = complex(-1.0, 0.0)
RABBIT = complex(-0.122561, 0.744862)
JUNCTION_BASILICA = complex(-0.75, 0.0)
# cardioid tangency c = mu/2 - mu^2/4 at mu = exp(2 pi i / 3)
JUNCTION_RABBIT = complex(-0.125, 3.0 * math.sqrt(3.0) / 8.0)

NAMED_PARAMETERS: Dict[str, complex] = {
    "basilica": BASILICA,
    "rabbit": RABBIT,
    "junction-basilica": JUNCTION_BASILICA,
    "junction-rabbit": JUNCTION_RABBIT,
}

# Quasicircle multiplicities used for the union spectra.
QUASICIRCLE_MULTIPLICITIES: Dict[str, Tuple[int, ...]] = {
    "basilica": (1, 2, 2, 2),
    "rabbit": (1, 2, 2),
}

QUASICIRCLE_ITERATIONS = 170

DEFAULT_PIXEL_BUDGET = 10 ** 8
_ROW_BLOCK = 256

# 4-connectivity
_CROSS = ndimage.generate_binary_structure(2, 1)


# ---------------------------------------------------------------------------
# Data model
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class JuliaSpec:
    """
    Parameters of one rasterisation.

    bbox is (xmin, xmax, ymin, ymax) in the complex plane; None means the
    square [-R, R]^2 around the escape disk.
    """

    c: complex
    max_iter: int = 100
    escape_radius: float = 2.0
    resolution: float = 128.0          # pixels per unit length
    bbox: Optional[Tuple[float, float, float, float]] = None

    def resolved_bbox(self) -> Tuple[float, float, float, float]:
        if self.bbox is not None:
            return self.bbox
        r = self.escape_radius
        return (-r, r, -r, r)

    def shape(self) -> Tuple[int, int]:
        """(height, width) in pixels."""
        xmin, xmax, ymin, ymax = self.resolved_bbox()
        width = max(1, int(round((xmax - xmin) * self.resolution)))
        height = max(1, int(round((ymax - ymin) * self.resolution)))
        return height, width

    def validate(self) -> "JuliaSpec":
        if self.max_iter < 1:
            raise InvalidConfigError(f"max_iter must be >= 1, got {self.max_iter}")
        if self.escape_radius < 2.0:
            raise InvalidConfigError(f"escape radius must be >= 2, got {self.escape_radius}")
        if not self.resolution > 0:
            raise InvalidConfigError(f"resolution must be > 0, got {self.resolution}")
        xmin, xmax, ymin, ymax = self.resolved_bbox()
        if not (xmax > xmin and ymax > ymin):
            raise InvalidConfigError(f"empty bounding box {self.resolved_bbox()}")
        return self


@dataclass(frozen=True, eq=False)
class RasterGrid:
    """
    Boolean occupancy grid with its physical placement.

    Attributes
    ----------
    bits:
        (height, width) boolean array, row-major; row 0 is the lowest y.
    origin:
        (x, y) of the lower-left corner of pixel (0, 0).
    pixel_size:
        side length of a pixel.
    """

    bits: np.ndarray
    origin: Tuple[float, float]
    pixel_size: float

    def __post_init__(self):
        if not self.pixel_size > 0:
            raise MeshError(f"pixel_size must be > 0, got {self.pixel_size}")
        if self.bits.ndim != 2:
            raise MeshError(f"raster bits must be 2-D, got shape {self.bits.shape}")

    @property
    def height(self) -> int:
        return int(self.bits.shape[0])

    @property
    def width(self) -> int:
        return int(self.bits.shape[1])

    @property
    def filled_count(self) -> int:
        return int(np.count_nonzero(self.bits))

    def center_coords(self) -> Tuple[np.ndarray, np.ndarray]:
        """x of every column centre, y of every row centre."""
        h = self.pixel_size
        return (self.origin[0] + (np.arange(self.width) + 0.5) * h,
                self.origin[1] + (np.arange(self.height) + 0.5) * h)

    def filled_centers(self) -> np.ndarray:
        """(n, 2) centres of the marked pixels."""
        rows, cols = np.nonzero(self.bits)
        h = self.pixel_size
        return np.column_stack((self.origin[0] + (cols + 0.5) * h,
                                self.origin[1] + (rows + 0.5) * h))

    def with_bits(self, bits: np.ndarray) -> "RasterGrid":
        return replace(self, bits=np.asarray(bits, dtype=bool))

    def scaled(self, factor: float) -> "RasterGrid":
        """Every length multiplied by ``factor``, areas by its square."""
        if not factor > 0:
            raise InvalidConfigError(f"length scale must be > 0, got {factor}")
        if factor == 1.0:
            return self
        return replace(self, origin=(self.origin[0] * factor, self.origin[1] * factor),
                       pixel_size=self.pixel_size * factor)

    def diameter(self) -> float:
        return self.pixel_size * math.hypot(self.width, self.height)


@dataclass(frozen=True, eq=False)
class ComponentSet:
    """
    Ranked interior components of a raster.

    labels[i, j] is the 1-based rank of the component holding pixel (i, j)
    (0 = unfilled); areas[r - 1] is the pixel count of rank r.
    """

    labels: np.ndarray
    areas: np.ndarray

    @property
    def count(self) -> int:
        return int(self.areas.shape[0])

    def mask(self, rank: int) -> np.ndarray:
        if not 1 <= rank <= self.count:
            raise MeshError(f"component rank {rank} out of range 1..{self.count}")
        return self.labels == rank


# ---------------------------------------------------------------------------
# Escape time
# ---------------------------------------------------------------------------


def escape_iterations(z: complex, c: complex, max_iter: int, R: float = 2.0) -> Optional[int]:
    """1-based orbit position of the first term with |.| > R, or None."""
    if R < 2.0:
        raise InvalidConfigError(f"escape radius must be >= 2, got {R}")
    r2 = R * R
    for n in range(1, max_iter + 1):
        if z.real * z.real + z.imag * z.imag > r2:
            return n
        z = z * z + c
    return None


def mandelbrot_member(c: complex, max_iter: int = 1000) -> bool:
    if max_iter < 1:
        raise InvalidConfigError(f"max_iter must be >= 1, got {max_iter}")
    return escape_iterations(0j, c, max_iter, 2.0) is None


def _centres(lo: float, hi: float, n: int, h: float) -> np.ndarray:
    # Offsets are half-integers times h about the box midpoint, so the grid is
    # exactly symmetric about the midpoint in floating point.
    mid = 0.5 * (lo + hi)
    return mid + (np.arange(n) - 0.5 * (n - 1)) * h


def _filled_block(z: np.ndarray, c: complex, max_iter: int, r2: float) -> np.ndarray:
    flat = z.ravel().copy()
    alive = np.arange(flat.size)
    filled = np.ones(flat.size, dtype=bool)
    for n in range(1, max_iter + 1):
        out = flat.real * flat.real + flat.imag * flat.imag > r2
        if out.any():
            filled[alive[out]] = False
            keep = ~out
            flat = flat[keep]
            alive = alive[keep]
            if flat.size == 0:
                break
        if n < max_iter:
            flat = flat * flat + c
    return filled.reshape(z.shape)


def rasterize_filled(spec: JuliaSpec, pixel_budget: int = DEFAULT_PIXEL_BUDGET) -> RasterGrid:
    """Mark every pixel whose centre survives ``max_iter`` orbit terms."""
    spec.validate()
    height, width = spec.shape()
    if height * width > pixel_budget:
        raise BudgetExceededError("pixels", height * width, pixel_budget)

    xmin, xmax, ymin, ymax = spec.resolved_bbox()
    h = 1.0 / spec.resolution
    xs = _centres(xmin, xmax, width, h)
    ys = _centres(ymin, ymax, height, h)
    r2 = spec.escape_radius ** 2

    bits = np.empty((height, width), dtype=bool)
    # Row blocks are independent; the result does not depend on the blocking.
    for start in range(0, height, _ROW_BLOCK):
        stop = min(height, start + _ROW_BLOCK)
        z = xs[np.newaxis, :] + 1j * ys[start:stop, np.newaxis]
        bits[start:stop] = _filled_block(z, spec.c, spec.max_iter, r2)

    origin = (float(xs[0] - 0.5 * h), float(ys[0] - 0.5 * h))
    return RasterGrid(bits=bits, origin=origin, pixel_size=h)


def pixel_area(grid: RasterGrid) -> float:
    return grid.filled_count * grid.pixel_size ** 2


def crop_to_filled(grid: RasterGrid, margin: int = 1) -> RasterGrid:
    """Shrink the grid to the filled bounding box plus ``margin`` empty pixels."""
    rows, cols = np.nonzero(grid.bits)
    if rows.size == 0:
        raise MeshError("cannot crop an empty raster")
    r0, r1 = rows.min(), rows.max() + 1
    c0, c1 = cols.min(), cols.max() + 1
    bits = np.pad(grid.bits[r0:r1, c0:c1], margin, constant_values=False)
    h = grid.pixel_size
    origin = (grid.origin[0] + (c0 - margin) * h, grid.origin[1] + (r0 - margin) * h)
    return RasterGrid(bits=bits, origin=origin, pixel_size=h)


# ---------------------------------------------------------------------------
# Raster topology
# ---------------------------------------------------------------------------


def _rank_labels(raw: np.ndarray, n: int) -> ComponentSet:
    if n == 0:
        return ComponentSet(labels=np.zeros(raw.shape, dtype=np.int32),
                            areas=np.zeros(0, dtype=np.int64))
    sizes = np.bincount(raw.ravel(), minlength=n + 1)[1:]
    # ndimage numbers components by their first pixel in row-major order, so a
    # stable sort on -size breaks ties by smallest pixel index.
    order = np.argsort(-sizes, kind="stable")
    rank_of = np.zeros(n + 1, dtype=np.int32)
    rank_of[order + 1] = np.arange(1, n + 1, dtype=np.int32)
    return ComponentSet(labels=rank_of[raw], areas=sizes[order].astype(np.int64))


def _first_occurrence_relabel(raw: np.ndarray) -> Tuple[np.ndarray, int]:
    """Renumber labels 1..n in order of first row-major appearance."""
    flat = raw.ravel()
    present = flat > 0
    uniq, first = np.unique(flat[present], return_index=True)
    order = np.argsort(first, kind="stable")
    remap = np.zeros(int(flat.max(initial=0)) + 1, dtype=np.int32)
    remap[uniq[order]] = np.arange(1, uniq.size + 1, dtype=np.int32)
    return remap[raw], int(uniq.size)


def interior_components(grid: RasterGrid, separation: int = 0) -> ComponentSet:
    """
    4-connected components of the filled pixels, largest first.

    With ``separation`` r > 0 the components are seeded on the mask eroded by
    r pixels, every filled pixel within r + 1 pixels of a seed joins its
    nearest seed, and what remains is labelled 4-connected as before. This
    splits components that only touch through thin pinches.
    """
    if grid.bits.size == 0:
        raise MeshError("interior_components needs a nonempty grid")
    bits = grid.bits
    if separation <= 0:
        raw, n = ndimage.label(bits, structure=_CROSS)
        return _rank_labels(raw, n)

    core = ndimage.binary_erosion(bits, structure=_CROSS, iterations=separation, border_value=0)
    seeds, n_seeds = ndimage.label(core, structure=_CROSS)
    raw = np.zeros(bits.shape, dtype=np.int32)
    if n_seeds:
        dist, (ri, ci) = ndimage.distance_transform_edt(seeds == 0, return_indices=True)
        near = bits & (dist <= separation + 1)
        raw[near] = seeds[ri[near], ci[near]]
    leftover, n_left = ndimage.label(bits & (raw == 0), structure=_CROSS)
    raw[leftover > 0] = leftover[leftover > 0] + n_seeds
    raw, n = _first_occurrence_relabel(raw)
    return _rank_labels(raw, n)


def component_grid(grid: RasterGrid, components: ComponentSet, rank: int) -> RasterGrid:
    return grid.with_bits(components.mask(rank))


def boundary_cells(grid: RasterGrid) -> RasterGrid:
    """Filled pixels with an unfilled (or out-of-grid) 4-neighbour."""
    inner = ndimage.binary_erosion(grid.bits, structure=_CROSS, border_value=0)
    return grid.with_bits(grid.bits & ~inner)


# ---------------------------------------------------------------------------
# Area map
# ---------------------------------------------------------------------------


@dataclass
class AreaRow:
    c: complex
    member: bool
    area: Optional[float]
    error: str = ""


def area_sweep(
    c_values: Sequence[complex],
    max_iter: int = 200,
    resolution: float = 128.0,
    pixel_budget: int = DEFAULT_PIXEL_BUDGET,
) -> List[AreaRow]:
    """Pixel area of K_c for every c, in input order; failures become rows with ``error``."""
    rows: List[AreaRow] = []
    for c in c_values:
        member = mandelbrot_member(c, max_iter)
        try:
            grid = rasterize_filled(JuliaSpec(c=c, max_iter=max_iter, resolution=resolution),
                                    pixel_budget=pixel_budget)
            rows.append(AreaRow(c=c, member=member, area=pixel_area(grid)))
        except FractalDrumError as exc:
            rows.append(AreaRow(c=c, member=member, area=None, error=str(exc)))
    return rows
