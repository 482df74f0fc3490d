"""
spectral.py — Counting functions, union spectra and Julia spectrum sweeps.

N(t) counts eigenvalues <= t and is compared with the Weyl term A t / (4π):

    D1(t) = N(t) - A t / (4π)
    D2(t) = D1(t) / t^β,   β = box dimension / 2

Julia spectra come from one pipeline (rasterize -> crop -> pixel mesh ->
solve) shared by the iteration comparison, the parameter slice and the
quasicircle decomposition.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple, TypeVar

import numpy as np

from fractaldrum.errors import BoundaryConditionError, FractalDrumError, InvalidConfigError
from fractaldrum.fem import DEFAULT_TOL, DIRICHLET, Spectrum, compute_spectrum, parse_bc
from fractaldrum.julia import (
    DEFAULT_PIXEL_BUDGET,
    QUASICIRCLE_ITERATIONS,
    JuliaSpec,
    RasterGrid,
    component_grid,
    crop_to_filled,
    interior_components,
    rasterize_filled,
)
from fractaldrum.meshing import DEFAULT_TRIANGLE_BUDGET, TriMesh, mesh_from_raster

T = TypeVar("T")
R = TypeVar("R")

# Julia-domain length factor of the reference eigenvalue tables: eigenvalues
# there are 1 / 0.6422^2 = 2.425 times those computed in the plane of c.
REFERENCE_LENGTH_SCALE = 0.6422


# ---------------------------------------------------------------------------
# Counting functions
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class CountingSeries:
    t: np.ndarray
    N: np.ndarray
    weyl: np.ndarray
    D1: np.ndarray
    D2: np.ndarray          # NaN where t <= 0
    beta: float
    area: float
    index_base: int
    truncated: bool = False
    weyl2: Optional[np.ndarray] = None   # two-term Weyl, when a perimeter was given

    def __len__(self) -> int:
        return int(self.t.size)


def weyl_term(t: np.ndarray, area: float) -> np.ndarray:
    return area * np.asarray(t, dtype=float) / (4.0 * math.pi)


def two_term_weyl(t: np.ndarray, area: float, perimeter: float, bc: str) -> np.ndarray:
    """A t / (4π) ∓ L sqrt(t) / (4π): minus for Dirichlet, plus for Neumann."""
    bc = parse_bc(bc)
    t = np.asarray(t, dtype=float)
    sign = -1.0 if bc == DIRICHLET else 1.0
    return weyl_term(t, area) + sign * perimeter * np.sqrt(np.maximum(t, 0.0)) / (4.0 * math.pi)


def remainders(t: np.ndarray, N: np.ndarray, area: float, beta: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(weyl, D1, D2) for counts N on the grid t."""
    weyl = weyl_term(t, area)
    d1 = N - weyl
    d2 = np.full_like(d1, np.nan)
    positive = t > 0.0
    d2[positive] = d1[positive] / t[positive] ** beta
    return weyl, d1, d2


def counting_series(
    spectrum: Spectrum,
    area: float,
    dimension: float,
    t_max: Optional[float] = None,
    perimeter: Optional[float] = None,
) -> CountingSeries:
    """
    Exact counting function on the grid of all eigenvalues plus midpoints.

    One extra point at half the first eigenvalue shows the empty region
    below it. When ``t_max`` lies past the largest computed eigenvalue of an
    incomplete spectrum the grid stops there and ``truncated`` is set.
    A polygon ``perimeter`` adds the two-term Weyl curve for the spectrum's
    boundary condition.
    """
    values = np.sort(np.asarray(spectrum.eigenvalues, dtype=float))
    if values.size == 0:
        raise InvalidConfigError("counting function of an empty spectrum")
    if not area > 0:
        raise InvalidConfigError(f"area must be > 0, got {area}")
    if not 1.0 <= dimension <= 2.0:
        raise InvalidConfigError(f"dimension must lie in [1, 2], got {dimension}")

    largest = float(values[-1])
    truncated = False
    if t_max is None:
        t_max = largest
    elif t_max > largest and not spectrum.complete:
        truncated = True
        t_max = largest

    grid = [values, 0.5 * (values[1:] + values[:-1])]
    if values[0] > 0.0:
        grid.append(np.array([0.5 * values[0]]))
    t = np.unique(np.concatenate(grid))
    t = t[t <= t_max]
    N = np.searchsorted(values, t, side="right").astype(np.int64)

    beta = dimension / 2.0
    weyl, d1, d2 = remainders(t, N, area, beta)
    weyl2 = None
    if perimeter is not None:
        if not perimeter > 0:
            raise InvalidConfigError(f"perimeter must be > 0, got {perimeter}")
        weyl2 = two_term_weyl(t, area, perimeter, spectrum.meta.bc)
    return CountingSeries(
        t=t, N=N, weyl=weyl, D1=d1, D2=d2, beta=beta, area=float(area),
        index_base=spectrum.index_base, truncated=truncated, weyl2=weyl2,
    )


# ---------------------------------------------------------------------------
# Union spectra
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class LabeledSpectrum:
    eigenvalues: np.ndarray
    labels: Tuple[str, ...]

    def __len__(self) -> int:
        return int(self.eigenvalues.size)

    def entries(self) -> List[Tuple[float, str]]:
        return list(zip(self.eigenvalues.tolist(), self.labels))


SpectrumPart = Tuple[Spectrum, int, str]


def union_spectrum(parts: Sequence[SpectrumPart]) -> LabeledSpectrum:
    """Sorted multiset union; each part's eigenvalues appear ``multiplicity`` times."""
    values: List[np.ndarray] = []
    labels: List[str] = []
    for spectrum, multiplicity, label in parts:
        if spectrum.meta.bc != DIRICHLET:
            raise BoundaryConditionError(f"union spectra combine Dirichlet parts only ('{label}' is {spectrum.meta.bc})")
        if multiplicity < 1:
            raise InvalidConfigError(f"multiplicity of '{label}' must be >= 1, got {multiplicity}")
        for _ in range(multiplicity):
            values.append(np.asarray(spectrum.eigenvalues, dtype=float))
            labels.extend([label] * len(spectrum))
    if not values:
        return LabeledSpectrum(eigenvalues=np.zeros(0), labels=())
    merged = np.concatenate(values)
    order = np.argsort(merged, kind="stable")
    return LabeledSpectrum(eigenvalues=merged[order], labels=tuple(labels[i] for i in order))


# ---------------------------------------------------------------------------
# Julia pipelines
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SolveSettings:
    """Numerical knobs shared by every Julia solve."""

    k: int = 10
    bc: str = DIRICHLET
    tol: float = DEFAULT_TOL
    seed: int = 0
    resolution: float = 128.0
    escape_radius: float = 2.0
    pixel_budget: int = DEFAULT_PIXEL_BUDGET
    triangle_budget: int = DEFAULT_TRIANGLE_BUDGET
    # lengths of the raster are multiplied by this before meshing
    length_scale: float = 1.0


def julia_label(c: complex, iterations: int) -> str:
    return f"julia c={c.real:+.6g}{c.imag:+.6g}i it={iterations}"


def julia_spectrum(
    c: complex,
    iterations: int,
    settings: SolveSettings = SolveSettings(),
) -> Tuple[Spectrum, TriMesh, RasterGrid]:
    """
    Spectrum of the ``iterations``-iteration filled Julia domain, with its mesh
    and raster. Both are in units of ``settings.length_scale``.
    """
    spec = JuliaSpec(c=c, max_iter=iterations, escape_radius=settings.escape_radius,
                     resolution=settings.resolution)
    grid = crop_to_filled(rasterize_filled(spec, pixel_budget=settings.pixel_budget))
    grid = grid.scaled(settings.length_scale)
    mesh = mesh_from_raster(grid, settings.triangle_budget)
    spectrum = compute_spectrum(mesh, settings.bc, settings.k, tol=settings.tol,
                                seed=settings.seed, label=julia_label(c, iterations))
    return spectrum, mesh, grid


def _representative_ranks(multiplicities: Sequence[int]) -> List[int]:
    """First rank of each multiplicity group: (1, 2, 2, 2) -> [1, 2, 4, 6]."""
    ranks = []
    nxt = 1
    for m in multiplicities:
        ranks.append(nxt)
        nxt += m
    return ranks


@dataclass(frozen=True, eq=False)
class QuasicirclePart:
    spectrum: Spectrum
    multiplicity: int
    label: str
    rank: int
    pixels: int
    mesh: TriMesh

    def as_part(self) -> SpectrumPart:
        return self.spectrum, self.multiplicity, self.label


def quasicircle_parts(
    c: complex,
    multiplicities: Sequence[int],
    settings: SolveSettings = SolveSettings(),
    iterations: int = QUASICIRCLE_ITERATIONS,
    separation: int = 2,
) -> List[QuasicirclePart]:
    """
    Dirichlet spectra of the largest interior components.

    Components are ranked by pixel area; groups of equal multiplicity are
    represented by their first rank and labelled QC1, QC2, ...
    """
    if not multiplicities:
        raise InvalidConfigError("need at least one quasicircle multiplicity")
    spec = JuliaSpec(c=c, max_iter=iterations, escape_radius=settings.escape_radius,
                     resolution=settings.resolution)
    grid = rasterize_filled(spec, pixel_budget=settings.pixel_budget)
    components = interior_components(grid, separation=separation)
    ranks = _representative_ranks(multiplicities)
    if ranks[-1] > components.count:
        raise InvalidConfigError(
            f"only {components.count} interior components at this resolution, need rank {ranks[-1]}"
        )

    parts: List[QuasicirclePart] = []
    for i, (rank, multiplicity) in enumerate(zip(ranks, multiplicities), start=1):
        sub = crop_to_filled(component_grid(grid, components, rank)).scaled(settings.length_scale)
        mesh = mesh_from_raster(sub, settings.triangle_budget)
        label = f"QC{i}"
        spectrum = compute_spectrum(mesh, DIRICHLET, settings.k, tol=settings.tol,
                                    seed=settings.seed, label=f"{julia_label(c, iterations)} {label}")
        parts.append(QuasicirclePart(spectrum, multiplicity, label, rank, sub.filled_count, mesh))
    return parts


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------


def _ordered_map(fn: Callable[[T], R], items: Sequence[T], workers: int) -> List[R]:
    """map() over a thread pool; results keep input order."""
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


@dataclass
class SpectrumRow:
    """One sweep cell: eigenvalues, or the error that replaced them."""

    c: complex
    iterations: int
    eigenvalues: Optional[np.ndarray]
    error: str = ""


def _solve_row(c: complex, iterations: int, settings: SolveSettings) -> SpectrumRow:
    try:
        spectrum, _, _ = julia_spectrum(c, iterations, settings)
        return SpectrumRow(c, iterations, spectrum.eigenvalues)
    except FractalDrumError as exc:
        partial = getattr(exc, "partial", None)
        values = None if partial is None else partial.eigenvalues
        return SpectrumRow(c, iterations, values, error=str(exc))


def iteration_comparison(
    c: complex,
    iteration_counts: Sequence[int],
    settings: SolveSettings = SolveSettings(),
    workers: int = 1,
) -> List[SpectrumRow]:
    """First k eigenvalues per iteration count, one row (column of the table) each."""
    counts = [int(n) for n in iteration_counts]
    if not counts:
        raise InvalidConfigError("need at least one iteration count")
    if any(b <= a for a, b in zip(counts, counts[1:])):
        raise InvalidConfigError(f"iteration counts must be strictly ascending, got {counts}")
    return _ordered_map(lambda n: _solve_row(c, n, settings), counts, workers)


def parameter_slice(
    c_values: Sequence[complex],
    settings: SolveSettings = SolveSettings(),
    iterations: int = 100,
    workers: int = 1,
) -> List[SpectrumRow]:
    """First k Dirichlet eigenvalues per c, in input order."""
    if not c_values:
        raise InvalidConfigError("parameter slice needs at least one c value")
    if settings.bc != DIRICHLET:
        raise BoundaryConditionError("parameter slices are computed with Dirichlet conditions")
    return _ordered_map(lambda c: _solve_row(complex(c), iterations, settings), list(c_values), workers)

