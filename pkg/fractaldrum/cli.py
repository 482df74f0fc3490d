"""
Fractal Drum CLI — core logic.

Used by:
- fractaldrum.py (git clone / direct run)
- fractaldrum.__main__ (python -m fractaldrum)
- pip entry_points (fractaldrum command)
"""

import argparse
import math
import os
import sys
import time
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np

from fractaldrum import __version__
from fractaldrum.errors import FractalDrumError, InvalidConfigError, SolverError

Log = Callable[[str], None]

# Options shared by every subcommand; None means "not given" so the rc file can fill it in.
COMMON_KEYS = ("output_dir", "k", "bc", "tol", "seed", "resolution", "iterations",
               "escape_radius", "pixel_budget", "triangle_budget", "workers", "length_scale")


# ---------------------------------------------------------------------------
# Literal grammar
# ---------------------------------------------------------------------------


def parse_complex(text: str) -> complex:
    """``re+imi`` literals (``-1+0i``, ``0.2``, ``0.74i``) or a named parameter."""
    from fractaldrum.julia import NAMED_PARAMETERS

    key = str(text).strip().lower()
    if key in NAMED_PARAMETERS:
        return NAMED_PARAMETERS[key]
    try:
        return complex(key.replace(" ", "").replace("i", "j"))
    except ValueError:
        raise InvalidConfigError(
            f"cannot read '{text}' as a complex number (use re+imi, e.g. -1+0i, "
            f"or one of {', '.join(NAMED_PARAMETERS)})"
        ) from None


def parse_range(text: str) -> List[float]:
    """``start:step:stop`` (stop included), a comma list, or a single value."""
    text = str(text).strip()
    try:
        if ":" in text:
            start, step, stop = (float(p) for p in text.split(":"))
        else:
            return [float(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise InvalidConfigError(f"cannot read '{text}' as a range (start:step:stop or a,b,c)") from None
    if not step > 0 or stop < start:
        raise InvalidConfigError(f"range '{text}' needs step > 0 and stop >= start")
    n = int(math.floor((stop - start) / step + 1e-9)) + 1
    return np.round(start + step * np.arange(n), 12).tolist()


def parse_ints(text: str) -> List[int]:
    try:
        return [int(p) for p in str(text).split(",") if p.strip()]
    except ValueError:
        raise InvalidConfigError(f"cannot read '{text}' as a comma list of integers") from None


def parse_sizes(text: str) -> List[Tuple[int, int]]:
    """``640x480,1280x960``"""
    sizes = []
    for part in str(text).split(","):
        try:
            w, h = (int(v) for v in part.lower().split("x"))
        except ValueError:
            raise InvalidConfigError(f"cannot read image size '{part}' (use WIDTHxHEIGHT)") from None
        sizes.append((w, h))
    return sizes


VALUE_OPTIONS = ("--c", "--re", "--im")


def join_negative_values(argv: List[str]) -> List[str]:
    """Fold ``--c -1+0i`` into ``--c=-1+0i``.

    argparse before Python 3.13 takes a value that starts with '-' and is not a
    plain number for an option flag.
    """
    out: List[str] = []
    i = 0
    while i < len(argv):
        arg = argv[i]
        if arg in VALUE_OPTIONS and i + 1 < len(argv) and argv[i + 1].startswith("-") \
                and argv[i + 1] != "--" and not argv[i + 1].lstrip("-")[:1].isalpha():
            out.append(f"{arg}={argv[i + 1]}")
            i += 2
            continue
        out.append(arg)
        i += 1
    return out


def _c_grid(re_text: str, im_text: str) -> List[complex]:
    """Every (re, im) pair, imaginary part outer."""
    return [complex(x, y) for y in parse_range(im_text) for x in parse_range(re_text)]


# ---------------------------------------------------------------------------
# Shared pieces
# ---------------------------------------------------------------------------


def _settings(config):
    from fractaldrum.spectral import SolveSettings

    return SolveSettings(
        k=config.k, bc=config.bc, tol=config.tol, seed=config.seed,
        resolution=config.resolution, escape_radius=config.escape_radius,
        pixel_budget=config.pixel_budget, triangle_budget=config.triangle_budget,
        length_scale=config.length_scale,
    )


def _out(config, name: str) -> str:
    return os.path.join(config.output_dir, name)


def _solve(mesh, config, label: str, log: Log):
    """compute_spectrum, writing whatever converged before re-raising a solver failure."""
    from fractaldrum.fem import compute_spectrum
    from fractaldrum.renderer import write_spectrum_csv

    log(f"[fractaldrum] Solving {config.bc} eigenproblem (k={config.k}, "
        f"{mesh.n_vertices} vertices) ...")
    try:
        return compute_spectrum(mesh, config.bc, config.k, tol=config.tol,
                                seed=config.seed, label=label)
    except SolverError as exc:
        if exc.partial is not None:
            write_spectrum_csv(_out(config, "spectrum.partial.csv"), exc.partial)
        raise


def _write_counting(config, spectrum, area: float, dimension: float, title: str, log: Log,
                    perimeter: Optional[float] = None):
    from fractaldrum.renderer import plot_counting, write_counting_csv
    from fractaldrum.spectral import counting_series

    series = counting_series(spectrum, area, dimension, perimeter=perimeter)
    write_counting_csv(_out(config, "counting.csv"), series)
    if series.truncated:
        log("[fractaldrum] Counting grid truncated at the largest computed eigenvalue")
    if config.options.get("plot"):
        plot_counting(_out(config, "counting.png"), series, title=title)
    return series


def _write_eigenfunctions(config, mesh, spectrum, log: Log, prefix: str = "") -> None:
    from fractaldrum.fem import energy_distribution
    from fractaldrum.renderer import (
        nodal_image,
        triangle_field_image,
        vertex_field_image,
        write_pgm,
        write_ppm,
        write_vertex_field_csv,
    )

    count = min(int(config.options.get("images", 0)), len(spectrum))
    if count <= 0:
        return
    log(f"[fractaldrum] Writing {count} eigenfunction and energy images ...")
    variant = config.options.get("energy", "gradient")
    for j, index in enumerate(spectrum.indices()[:count].tolist()):
        u = spectrum.eigenvectors[:, j]
        stem = f"{prefix}{index:03d}"
        field = vertex_field_image(mesh, u)
        write_pgm(_out(config, f"eigenfunction_{stem}.pgm"), field)
        write_ppm(_out(config, f"eigenfunction_{stem}.ppm"), field, cmap="RdBu_r")
        write_pgm(_out(config, f"nodal_{stem}.pgm"), nodal_image(mesh, u))
        write_vertex_field_csv(_out(config, f"eigenfunction_{stem}.csv"), u)
        energy = energy_distribution(mesh, u, variant)
        write_pgm(_out(config, f"energy_{stem}.pgm"), triangle_field_image(mesh, energy.values))


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def _snowflake_spec(opts: Dict[str, Any]):
    from fractaldrum.geometry import SnowflakeSpec, quadratic_preset

    level = int(opts["level"])
    if opts.get("preset"):
        return quadratic_preset(opts["preset"], level).validate()
    if opts["kind"] == "quadratic":
        if opts.get("b") is None:
            raise InvalidConfigError("quadratic snowflakes need --b or --preset")
        return SnowflakeSpec.quadratic(float(opts["b"]), level).validate()
    return SnowflakeSpec.classic(level).validate()


def _write_combination(config, mesh, spectrum, pair: List[int], log: Log) -> None:
    from fractaldrum.fem import energy_combination, energy_distribution
    from fractaldrum.renderer import triangle_field_image, write_csv, write_pgm

    if len(pair) != 2:
        raise InvalidConfigError(f"--combine takes two eigenvalue indices, got {pair}")
    base = spectrum.index_base
    nxt = max(pair) + 1
    for index in pair + [nxt]:
        if not base <= index < base + len(spectrum):
            raise InvalidConfigError(
                f"--combine index {index} outside the computed range {base}..{base + len(spectrum) - 1}"
            )
    variant = config.options.get("energy", "gradient")
    field_a, field_b, field_next = (
        energy_distribution(mesh, spectrum.eigenvectors[:, i - base], variant) for i in pair + [nxt]
    )
    combined = energy_combination(field_a, field_b, (1.0, 1.0))
    tag = f"{pair[0]}_{pair[1]}"
    write_pgm(_out(config, f"energy_combined_{tag}.pgm"), triangle_field_image(mesh, combined.values))
    write_pgm(_out(config, f"energy_next_{nxt:03d}.pgm"), triangle_field_image(mesh, field_next.values))
    write_csv(_out(config, f"combination_{tag}.csv"), ("triangle_index", "combined", "next"),
              zip(range(mesh.n_triangles), combined.values.tolist(), field_next.values.tolist()))
    log(f"[fractaldrum] Energy of λ{pair[0]} + λ{pair[1]} written next to λ{nxt}")


def _write_symmetry(config, mesh, spectrum, maps, log: Log, name: str = "symmetry.csv",
                    columns: Optional[List[str]] = None, exact: bool = True) -> None:
    from fractaldrum.fem import assemble, symmetry_signature
    from fractaldrum.renderer import write_csv

    _, M = assemble(mesh)
    rows = []
    for j, index in enumerate(spectrum.indices().tolist()):
        sig = symmetry_signature(mesh, spectrum.eigenvectors[:, j], maps, M, exact=exact)
        rows.append([index, float(spectrum.eigenvalues[j])] + sig.tolist())
    columns = columns or [f"g{i}" for i in range(len(maps))]
    write_csv(_out(config, name), ["index", "eigenvalue"] + list(columns), rows)
    log(f"[fractaldrum] Symmetry signatures under {len(maps)} maps written to {name}")


def cmd_snowflake(config, log: Log) -> str:
    from fractaldrum.geometry import boxdim_closed_form, snowflake_polygon, symmetry_maps
    from fractaldrum.meshing import mesh_snowflake
    from fractaldrum.renderer import write_mesh_off, write_polygon_csv, write_spectrum_csv

    opts = config.options
    spec = _snowflake_spec(opts)
    log(f"[fractaldrum] Building {spec.label} ...")
    polygon = snowflake_polygon(spec)
    write_polygon_csv(_out(config, "polygon.csv"), polygon)

    mesh = mesh_snowflake(spec, int(opts["refine"]), config.triangle_budget)
    write_mesh_off(_out(config, "mesh.off"), mesh)
    log(f"[fractaldrum] Mesh: {mesh.n_vertices} vertices, {mesh.n_triangles} triangles, h={mesh.h:.4g}")

    spectrum = _solve(mesh, config, spec.label, log)
    write_spectrum_csv(_out(config, "spectrum.csv"), spectrum)
    _write_counting(config, spectrum, mesh.area(), boxdim_closed_form(spec), spec.label, log,
                    perimeter=polygon.perimeter())
    _write_eigenfunctions(config, mesh, spectrum, log)
    if opts.get("combine"):
        _write_combination(config, mesh, spectrum, parse_ints(opts["combine"]), log)
    if opts.get("symmetry") and spec.kind == "classic":
        _write_symmetry(config, mesh, spectrum, symmetry_maps(spec), log)
    return f"{len(spectrum)} eigenvalues of {spec.label} ({mesh.n_triangles} triangles)"


def _julia_area_only(config, c: complex, log: Log) -> str:
    from fractaldrum.julia import JuliaSpec, pixel_area, rasterize_filled
    from fractaldrum.renderer import raster_image, write_csv, write_pgm

    spec = JuliaSpec(c=c, max_iter=config.iterations, escape_radius=config.escape_radius,
                     resolution=config.resolution)
    log(f"[fractaldrum] Rasterising K_c for c={c} ...")
    grid = rasterize_filled(spec, pixel_budget=config.pixel_budget).scaled(config.length_scale)
    area = pixel_area(grid)
    write_pgm(_out(config, "filled.pgm"), raster_image(grid))
    write_csv(_out(config, "area.csv"),
              ("re_c", "im_c", "iterations", "resolution", "length_scale", "pixel_size", "area"),
              [(c.real, c.imag, config.iterations, config.resolution, config.length_scale,
                grid.pixel_size, area)])
    print(repr(area))
    return f"area {area:.6g} ({grid.filled_count} pixels)"


def _julia_compare(config, c: complex, log: Log) -> str:
    from fractaldrum.renderer import write_iterations_csv
    from fractaldrum.spectral import iteration_comparison

    counts = parse_ints(config.options["compare_iterations"])
    log(f"[fractaldrum] Solving for iteration counts {counts} ...")
    rows = iteration_comparison(c, counts, _settings(config), workers=config.workers)
    index_base = 0 if config.bc == "neumann" else 1
    write_iterations_csv(_out(config, "iterations.csv"), rows, config.k, index_base)
    failed = [r for r in rows if r.error]
    for r in failed:
        log(f"[fractaldrum] {r.iterations} iterations failed: {r.error}")
    return f"{len(rows) - len(failed)}/{len(rows)} iteration counts solved"


def _julia_quasicircles(config, c: complex, log: Log) -> str:
    from fractaldrum.geometry import REFLECTION_NAMES, axis_reflections
    from fractaldrum.julia import QUASICIRCLE_MULTIPLICITIES
    from fractaldrum.renderer import write_spectrum_csv, write_union_csv
    from fractaldrum.spectral import julia_label, quasicircle_parts, union_spectrum

    opts = config.options
    if opts.get("multiplicities"):
        multiplicities = parse_ints(opts["multiplicities"])
    else:
        name = str(opts["c"]).strip().lower()
        if name not in QUASICIRCLE_MULTIPLICITIES:
            raise InvalidConfigError(
                "--quasicircles needs --multiplicities unless --c names "
                f"{' or '.join(QUASICIRCLE_MULTIPLICITIES)}"
            )
        multiplicities = list(QUASICIRCLE_MULTIPLICITIES[name])
    log(f"[fractaldrum] Extracting quasicircles (multiplicities {multiplicities}) ...")
    parts = quasicircle_parts(c, multiplicities, _settings(config),
                              iterations=int(opts["qc_iterations"]),
                              separation=int(opts["separation"]))
    for part in parts:
        write_spectrum_csv(_out(config, f"spectrum_{part.label}.csv"), part.spectrum)
        log(f"[fractaldrum] {part.label}: rank {part.rank}, {part.pixels} pixels, "
            f"λ1={part.spectrum.eigenvalues[0]:.5g} (x{part.multiplicity})")
        # the union is always Dirichlet; per-part outputs follow --bc
        spectrum = part.spectrum
        if config.bc != "dirichlet":
            label = f"{julia_label(c, int(opts['qc_iterations']))} {part.label}"
            spectrum = _solve(part.mesh, config, label, log)
            write_spectrum_csv(_out(config, f"spectrum_{part.label}_{config.bc}.csv"), spectrum)
        _write_eigenfunctions(config, part.mesh, spectrum, log, prefix=f"{part.label}_")
        if opts.get("symmetry"):
            _write_symmetry(config, part.mesh, spectrum, axis_reflections(part.mesh.center_of_mass()),
                            log, name=f"symmetry_{part.label}.csv", columns=list(REFLECTION_NAMES),
                            exact=False)
    union = union_spectrum([p.as_part() for p in parts])
    write_union_csv(_out(config, "union.csv"), union)
    return f"union spectrum of {len(parts)} quasicircles ({len(union)} entries)"


def cmd_julia(config, log: Log) -> str:
    from fractaldrum.boxdim import raster_dimension
    from fractaldrum.julia import interior_components, pixel_area
    from fractaldrum.renderer import (
        raster_image,
        write_components_csv,
        write_csv,
        write_mesh_off,
        write_pgm,
        write_spectrum_csv,
    )
    from fractaldrum.spectral import julia_label, julia_spectrum

    opts = config.options
    c = parse_complex(opts["c"])
    if opts.get("area_only"):
        return _julia_area_only(config, c, log)
    if opts.get("compare_iterations"):
        return _julia_compare(config, c, log)
    if opts.get("quasicircles"):
        return _julia_quasicircles(config, c, log)

    log(f"[fractaldrum] Meshing and solving {julia_label(c, config.iterations)} ...")
    try:
        spectrum, mesh, grid = julia_spectrum(c, config.iterations, _settings(config))
    except SolverError as exc:
        if exc.partial is not None:
            write_spectrum_csv(_out(config, "spectrum.partial.csv"), exc.partial)
        raise
    area = pixel_area(grid)
    write_pgm(_out(config, "filled.pgm"), raster_image(grid))
    write_csv(_out(config, "area.csv"),
              ("re_c", "im_c", "iterations", "resolution", "length_scale", "pixel_size", "area"),
              [(c.real, c.imag, config.iterations, config.resolution, config.length_scale,
                grid.pixel_size, area)])
    write_components_csv(_out(config, "components.csv"), interior_components(grid), grid.pixel_size)
    write_mesh_off(_out(config, "mesh.off"), mesh)
    write_spectrum_csv(_out(config, "spectrum.csv"), spectrum)

    if opts.get("dimension") is not None:
        dimension = float(opts["dimension"])
    else:
        try:
            _, fit = raster_dimension(grid)
            dimension = fit.dimension
            log(f"[fractaldrum] Box-counting dimension of the raster boundary: {dimension:.4f}")
        except InvalidConfigError as exc:
            dimension = 1.0
            log(f"[fractaldrum] No dimension fit ({exc}); using 1 for D2")
    dimension = min(2.0, max(1.0, dimension))
    _write_counting(config, spectrum, area, dimension, julia_label(c, config.iterations), log)
    _write_eigenfunctions(config, mesh, spectrum, log)
    return f"{len(spectrum)} eigenvalues, area {area:.6g} ({mesh.n_triangles} triangles)"


def cmd_boxdim(config, log: Log) -> str:
    from fractaldrum.boxdim import (
        STANDARD_IMAGE_SIZES,
        count_series,
        dimension_sweep,
        fit_dimension,
        julia_dimension,
        snowflake_dimension,
    )
    from fractaldrum.geometry import boxdim_closed_form
    from fractaldrum.julia import JuliaSpec
    from fractaldrum.renderer import write_boxcount_csv, write_fit_csv, write_sweep_csv

    opts = config.options
    if opts.get("julia_sweep"):
        cs = _c_grid(opts["re"], opts["im"])
        sizes = parse_sizes(opts["sizes"]) if opts.get("sizes") else list(STANDARD_IMAGE_SIZES[:3])
        log(f"[fractaldrum] Dimension sweep: {len(cs)} values of c x {len(sizes)} image sizes ...")
        rows = dimension_sweep(cs, sizes, max_iter=config.iterations, pixel_budget=config.pixel_budget)
        write_sweep_csv(_out(config, "sweep.csv"), rows)
        ok = sum(1 for r in rows if not r.error)
        return f"{ok}/{len(rows)} sweep cells fitted"

    if opts.get("segment"):
        points = np.column_stack((np.linspace(0.0, 1.0, 4097), np.zeros(4097)))
        series = count_series(points, 2.0 ** -np.arange(2, 11), anchor=(0.0, 0.0))
        fit = fit_dimension(series)
        label = "unit segment"
    elif opts.get("c") is not None:
        c = parse_complex(opts["c"])
        spec = JuliaSpec(c=c, max_iter=config.iterations, escape_radius=config.escape_radius,
                         resolution=config.resolution)
        log(f"[fractaldrum] Box-counting the boundary of K_c for c={c} ...")
        series, fit = julia_dimension(spec, pixel_budget=config.pixel_budget)
        label = f"c={c}"
    else:
        spec = _snowflake_spec(opts)
        log(f"[fractaldrum] Box-counting {spec.label} "
            f"(closed form {boxdim_closed_form(spec):.5f}) ...")
        series, fit = snowflake_dimension(spec)
        label = spec.label

    write_boxcount_csv(_out(config, "boxcount.csv"), series)
    write_fit_csv(_out(config, "fit.csv"), fit)
    return f"{label}: d = {fit.dimension:.4f}, fit error {fit.fit_error:.2g}"


def cmd_slice(config, log: Log) -> str:
    from fractaldrum.renderer import write_slice_csv
    from fractaldrum.spectral import parameter_slice

    cs = _c_grid(config.options["re"], config.options["im"])
    log(f"[fractaldrum] Solving {len(cs)} Julia domains ({config.iterations} iterations) ...")
    rows = parameter_slice(cs, _settings(config), iterations=config.iterations, workers=config.workers)
    write_slice_csv(_out(config, "slice.csv"), rows, config.k)
    for r in rows:
        if r.error:
            log(f"[fractaldrum] c={r.c} failed: {r.error}")
    ok = sum(1 for r in rows if not r.error)
    return f"{ok}/{len(rows)} values of c solved"


def cmd_area_map(config, log: Log) -> str:
    from fractaldrum.julia import area_sweep
    from fractaldrum.renderer import write_area_csv

    cs = _c_grid(config.options["re"], config.options["im"])
    log(f"[fractaldrum] Pixel areas for {len(cs)} values of c ...")
    rows = area_sweep(cs, max_iter=config.iterations, resolution=config.resolution,
                      pixel_budget=config.pixel_budget)
    write_area_csv(_out(config, "area_map.csv"), rows)
    members = sum(1 for r in rows if r.member)
    return f"{len(rows)} areas ({members} in the Mandelbrot set)"


COMMANDS: Dict[str, Callable[[Any, Log], str]] = {
    "snowflake": cmd_snowflake,
    "julia": cmd_julia,
    "boxdim": cmd_boxdim,
    "slice": cmd_slice,
    "area-map": cmd_area_map,
}


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def _common_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-o", "--output-dir", default=None,
                        help="Directory for all outputs (default: fractaldrum-out)")
    common.add_argument("-k", type=int, default=None, help="Number of eigenvalues (default: 20)")
    common.add_argument("--bc", choices=["dirichlet", "neumann"], default=None,
                        help="Boundary condition (default: dirichlet)")
    common.add_argument("--tol", type=float, default=None, help="Relative residual tolerance (default: 1e-8)")
    common.add_argument("--seed", type=int, default=None, help="Eigensolver start-vector seed (default: 0)")
    common.add_argument("--resolution", type=float, default=None,
                        help="Julia raster pixels per unit length (default: 128)")
    common.add_argument("--iterations", type=int, default=None,
                        help="Escape-time iterations (default: 100)")
    common.add_argument("--escape-radius", type=float, default=None, help="Escape radius R >= 2 (default: 2)")
    common.add_argument("--pixel-budget", type=int, default=None, help="Refuse rasters above this many pixels")
    common.add_argument("--triangle-budget", type=int, default=None, help="Refuse meshes above this many triangles")
    common.add_argument("--workers", type=int, default=None, help="Parallel solves in sweeps (default: 1)")
    common.add_argument("--length-scale", default=None, metavar="S",
                        help="Multiply Julia-domain lengths by S, or 'reference' (default: 1)")
    common.add_argument("--plot", action="store_true", help="Also write counting-function PNGs")
    # SUPPRESS keeps a top-level --quiet from being reset by the subparser default
    common.add_argument("--quiet", action="store_true", default=argparse.SUPPRESS,
                        help="Suppress progress messages")
    return common


def _snowflake_args(p: argparse.ArgumentParser, level: int) -> None:
    p.add_argument("--kind", choices=["classic", "quadratic"], default="classic")
    p.add_argument("--level", type=int, default=level, help=f"Prefractal level (default: {level})")
    p.add_argument("--b", type=float, default=None, help="Quadratic parameter b (a = (1-b)/2)")
    p.add_argument("--preset", choices=["a=0.45", "a=0.4", "lattice"], default=None,
                   help="Quadratic family preset")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fractaldrum",
        description="Fractal Drum — Laplacian spectra of snowflake and Julia-set domains.",
    )
    parser.add_argument("--quiet", action="store_true", help="Suppress progress messages")
    parser.add_argument("--version", action="version", version=f"fractaldrum {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    common = _common_parser()

    p = sub.add_parser("snowflake", parents=[common], help="Snowflake polygon, mesh and spectrum")
    _snowflake_args(p, level=3)
    p.add_argument("--refine", type=int, default=1, help="Uniform refinement steps (default: 1)")
    p.add_argument("--images", type=int, default=6, help="Eigenfunctions to render (default: 6)")
    p.add_argument("--energy", choices=["gradient", "edge-normal"], default="gradient")
    p.add_argument("--combine", default=None, metavar="I,J",
                   help="Write the summed energy of eigenfunctions I and J next to J+1")
    p.add_argument("--symmetry", action="store_true",
                   help="Write D6 symmetry signatures (classic snowflake)")

    p = sub.add_parser("julia", parents=[common], help="Filled Julia set area, mesh and spectrum")
    p.add_argument("--c", default="0", help="Parameter as re+imi or a name (default: 0)")
    p.add_argument("--area-only", action="store_true", help="Only compute the pixel area")
    p.add_argument("--compare-iterations", default=None, metavar="N1,N2,...",
                   help="Spectra for several iteration counts (iterations.csv)")
    p.add_argument("--quasicircles", action="store_true", help="Union spectrum of quasicircles (union.csv)")
    p.add_argument("--symmetry", action="store_true",
                   help="With --quasicircles, signatures under reflections about each component centroid")
    p.add_argument("--multiplicities", default=None, metavar="M1,M2,...")
    p.add_argument("--qc-iterations", type=int, default=170,
                   help="Iterations for quasicircle extraction (default: 170)")
    p.add_argument("--separation", type=int, default=2,
                   help="Erosion depth separating touching quasicircles (default: 2)")
    p.add_argument("--dimension", type=float, default=None,
                   help="Box dimension for D2 (default: fitted on the raster)")
    p.add_argument("--images", type=int, default=6, help="Eigenfunctions to render (default: 6)")
    p.add_argument("--energy", choices=["gradient", "edge-normal"], default="gradient")

    p = sub.add_parser("boxdim", parents=[common], help="Box-counting dimension estimates")
    _snowflake_args(p, level=6)
    p.add_argument("--c", default=None, help="Fit a Julia boundary instead of a snowflake")
    p.add_argument("--segment", action="store_true", help="Self-test on the unit segment")
    p.add_argument("--julia-sweep", action="store_true", help="Sweep c over --re x --im and --sizes")
    p.add_argument("--re", default="-1.0:0.05:0.3", help="Real parts, start:step:stop or a,b,c")
    p.add_argument("--im", default="0", help="Imaginary parts, start:step:stop or a,b,c")
    p.add_argument("--sizes", default=None, metavar="WxH,...",
                   help="Image sizes over [-2,2]x[-1.5,1.5] (default: 640x480..1920x1440)")

    p = sub.add_parser("slice", parents=[common], help="Dirichlet spectra along a slice of c values")
    p.add_argument("--re", default="-0.74:0.01:-0.54")
    p.add_argument("--im", default="0")

    p = sub.add_parser("area-map", parents=[common], help="Pixel areas of K_c over a grid of c")
    p.add_argument("--re", default="-2.0:0.05:0.5")
    p.add_argument("--im", default="0")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    from fractaldrum.config import build_config, load_rc
    from fractaldrum.renderer import write_run_json

    raw_argv = join_negative_values(list(sys.argv[1:] if argv is None else argv))
    parser = build_parser()
    args = parser.parse_args(raw_argv)

    # progress on stderr so stdout carries only results
    quiet = getattr(args, "quiet", False)
    _log: Log = (lambda msg: None) if quiet else (lambda msg: print(msg, file=sys.stderr))

    values = vars(args)
    cli = {key: values.get(key) for key in COMMON_KEYS}
    options = {key: v for key, v in values.items()
               if key not in COMMON_KEYS and key not in ("command", "quiet")}

    t0 = time.time()
    try:
        rc = load_rc(os.getcwd())
        if rc:
            _log("[fractaldrum] Loaded .fractaldrumrc config")
        config = build_config(args.command, cli, rc, options, raw_argv)
        os.makedirs(config.output_dir, exist_ok=True)
        write_run_json(config.output_dir, config.to_dict())
        summary = COMMANDS[args.command](config, _log)
    except FractalDrumError as exc:
        print(f"Error: {exc}", file=sys.stderr)
        return exc.exit_code

    dt = time.time() - t0
    print(f"Done! {summary} -> {config.output_dir} [{dt:.1f}s]")
    return 0
