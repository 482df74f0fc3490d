"""
renderer.py — Write results to disk: CSV tables, OFF meshes, PGM/PPM images,
counting-function plots and the run.json sidecar.

Every file is written atomically (temp file in the target directory, then
``os.replace``). CSVs use ``,`` / ``.`` / LF with a header row; floats are
written with ``repr`` so a re-read reproduces them exactly.
"""

import io
import json
import os
import tempfile
from typing import Any, Dict, Iterable, List, Optional, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib import colormaps  # noqa: E402
from matplotlib.tri import LinearTriInterpolator, Triangulation  # noqa: E402

from fractaldrum.boxdim import BoxCountSeries, LogLogFit, SweepRow  # noqa: E402
from fractaldrum.fem import Spectrum  # noqa: E402
from fractaldrum.geometry import Polygon  # noqa: E402
from fractaldrum.julia import AreaRow, ComponentSet, RasterGrid  # noqa: E402
from fractaldrum.meshing import TriMesh  # noqa: E402
from fractaldrum.spectral import CountingSeries, LabeledSpectrum, SpectrumRow  # noqa: E402

RUN_SIDECAR = "run.json"
DEFAULT_IMAGE_SIZE = 512


# ---------------------------------------------------------------------------
# Primitives
# ---------------------------------------------------------------------------


def _atomic_write(path: str, data: bytes) -> str:
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def _cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv(path: str, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    lines = [",".join(header)]
    lines.extend(",".join(_cell(v) for v in row) for row in rows)
    return _atomic_write(path, ("\n".join(lines) + "\n").encode("utf-8"))


def read_csv(path: str) -> List[Dict[str, str]]:
    """Header-keyed rows, values left as text."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    header = lines[0].split(",")
    return [dict(zip(header, line.split(","))) for line in lines[1:] if line]


# ---------------------------------------------------------------------------
# Tables
# ---------------------------------------------------------------------------


def write_polygon_csv(path: str, polygon: Polygon) -> str:
    return write_csv(path, ("x", "y"), polygon.vertices.tolist())


def write_mesh_off(path: str, mesh: TriMesh) -> str:
    """First line ``V T``, then V lines ``x y``, then T lines ``i j k`` (0-based)."""
    out = [f"{mesh.n_vertices} {mesh.n_triangles}"]
    out.extend(f"{repr(float(x))} {repr(float(y))}" for x, y in mesh.vertices)
    out.extend(f"{i} {j} {k}" for i, j, k in mesh.triangles.tolist())
    return _atomic_write(path, ("\n".join(out) + "\n").encode("utf-8"))


def read_mesh_off(path: str):
    """(vertices, triangles) from a file written by ``write_mesh_off``."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    nv, nt = (int(v) for v in lines[0].split())
    vertices = np.array([[float(v) for v in line.split()] for line in lines[1:1 + nv]])
    triangles = np.array([[int(v) for v in line.split()] for line in lines[1 + nv:1 + nv + nt]],
                         dtype=np.int64)
    return vertices.reshape(nv, 2), triangles.reshape(nt, 3)


def write_spectrum_csv(path: str, spectrum: Spectrum) -> str:
    """``index`` starts at 1 for Dirichlet and at 0 for Neumann."""
    return write_csv(path, ("index", "eigenvalue"),
                     zip(spectrum.indices().tolist(), spectrum.eigenvalues.tolist()))


def write_counting_csv(path: str, series: CountingSeries) -> str:
    """
    ``index_base`` is the index of the first eigenvalue counted by N: 1 for
    Dirichlet, 0 for Neumann (N then includes λ0 = 0). ``weyl2`` is empty
    unless a perimeter was known.
    """
    weyl2 = [None] * len(series) if series.weyl2 is None else series.weyl2.tolist()
    return write_csv(
        path, ("t", "N", "weyl", "D1", "D2", "weyl2", "index_base"),
        zip(series.t.tolist(), series.N.tolist(), series.weyl.tolist(),
            series.D1.tolist(), series.D2.tolist(), weyl2, [series.index_base] * len(series)),
    )


def write_union_csv(path: str, union: LabeledSpectrum) -> str:
    return write_csv(
        path, ("rank", "eigenvalue", "source"),
        ((i, value, label) for i, (value, label) in enumerate(union.entries(), start=1)),
    )


def write_vertex_field_csv(path: str, values: np.ndarray) -> str:
    return write_csv(path, ("vertex_index", "value"), enumerate(np.asarray(values).tolist()))


def write_boxcount_csv(path: str, series: BoxCountSeries) -> str:
    return write_csv(path, ("box_size", "count"), zip(series.sizes.tolist(), series.counts.tolist()))


def write_fit_csv(path: str, fit: LogLogFit) -> str:
    return write_csv(path, ("dimension", "fit_error", "intercept"),
                     [(fit.dimension, fit.fit_error, fit.intercept)])


def write_sweep_csv(path: str, rows: Sequence[SweepRow]) -> str:
    return write_csv(
        path, ("re_c", "im_c", "resolution_px", "dimension", "fit_error", "error"),
        ((r.c.real, r.c.imag, f"{r.resolution_px[0]}x{r.resolution_px[1]}",
          r.dimension, r.fit_error, r.error) for r in rows),
    )


def _padded(values: Optional[np.ndarray], k: int) -> List[Optional[float]]:
    vals = [] if values is None else np.asarray(values).tolist()
    return (vals + [None] * k)[:k]


def write_slice_csv(path: str, rows: Sequence[SpectrumRow], k: int) -> str:
    header = ["c_re", "c_im"] + [f"lambda_{j}" for j in range(1, k + 1)] + ["error"]
    return write_csv(path, header,
                     ([r.c.real, r.c.imag] + _padded(r.eigenvalues, k) + [r.error] for r in rows))


def write_iterations_csv(path: str, rows: Sequence[SpectrumRow], k: int, index_base: int) -> str:
    """One column per iteration count; failed columns are left empty."""
    header = ["index"] + [f"it_{r.iterations}" for r in rows]
    columns = [_padded(r.eigenvalues, k) for r in rows]
    return write_csv(path, header,
                     ([index_base + j] + [col[j] for col in columns] for j in range(k)))


def write_components_csv(path: str, components: ComponentSet, pixel_size: float) -> str:
    return write_csv(
        path, ("component_id", "pixel_count", "area"),
        ((rank, int(n), float(n) * pixel_size ** 2)
         for rank, n in enumerate(components.areas.tolist(), start=1)),
    )


def write_area_csv(path: str, rows: Sequence[AreaRow]) -> str:
    return write_csv(path, ("re_c", "im_c", "member", "area", "error"),
                     ((r.c.real, r.c.imag, r.member, r.area, r.error) for r in rows))


def write_run_json(directory: str, payload: Dict[str, Any]) -> str:
    text = json.dumps(payload, indent=2, sort_keys=True, ensure_ascii=False)
    return _atomic_write(os.path.join(directory, RUN_SIDECAR), (text + "\n").encode("utf-8"))


# ---------------------------------------------------------------------------
# Images
# ---------------------------------------------------------------------------


def to_gray(image: np.ndarray) -> np.ndarray:
    """Linear map of [min, max] to [0, 255]; NaN becomes 0, a constant image 0."""
    img = np.asarray(image, dtype=float)
    finite = np.isfinite(img)
    out = np.zeros(img.shape, dtype=np.uint8)
    if not finite.any():
        return out
    lo, hi = float(img[finite].min()), float(img[finite].max())
    if hi > lo:
        out[finite] = np.rint((img[finite] - lo) / (hi - lo) * 255.0).astype(np.uint8)
    return out


def write_pgm(path: str, image: np.ndarray) -> str:
    """
    8-bit binary PGM (P5). Row 0 of ``image`` is the lowest y, so rows are flipped.
    Boolean masks are written as 0 / 255 directly.
    """
    image = np.asarray(image)
    if image.dtype == bool:
        gray = np.where(image, 255, 0).astype(np.uint8)[::-1]
    else:
        gray = to_gray(image)[::-1]
    h, w = gray.shape
    return _atomic_write(path, f"P5\n{w} {h}\n255\n".encode("ascii") + gray.tobytes())


def write_ppm(path: str, image: np.ndarray, cmap: str = "viridis") -> str:
    """8-bit binary PPM (P6) through a matplotlib colormap; NaN pixels are black."""
    img = np.asarray(image, dtype=float)
    scaled = to_gray(img).astype(float) / 255.0
    rgb = np.rint(colormaps[cmap](scaled)[..., :3] * 255.0).astype(np.uint8)
    rgb[~np.isfinite(img)] = 0
    rgb = np.ascontiguousarray(rgb[::-1])
    h, w = rgb.shape[:2]
    return _atomic_write(path, f"P6\n{w} {h}\n255\n".encode("ascii") + rgb.tobytes())


def raster_image(grid: RasterGrid) -> np.ndarray:
    """Filled pixels as a boolean mask (white in a PGM)."""
    return np.asarray(grid.bits, dtype=bool)


def _sample_points(mesh: TriMesh, size: int):
    if mesh.raster is not None:
        xs, ys = mesh.raster.center_coords()
    else:
        lo = mesh.vertices.min(axis=0)
        hi = mesh.vertices.max(axis=0)
        step = float(max(hi - lo)) / size
        xs = lo[0] + (np.arange(int(np.ceil((hi[0] - lo[0]) / step))) + 0.5) * step
        ys = lo[1] + (np.arange(int(np.ceil((hi[1] - lo[1]) / step))) + 0.5) * step
    return np.meshgrid(xs, ys)


def vertex_field_image(mesh: TriMesh, values: np.ndarray, size: int = DEFAULT_IMAGE_SIZE) -> np.ndarray:
    """P1 field sampled at pixel centres (the raster for pixel meshes); NaN outside."""
    gx, gy = _sample_points(mesh, size)
    tri = Triangulation(mesh.vertices[:, 0], mesh.vertices[:, 1], mesh.triangles)
    sampled = LinearTriInterpolator(tri, np.asarray(values, dtype=float))(gx, gy)
    return np.ma.filled(sampled.astype(float), np.nan)


def nodal_image(mesh: TriMesh, values: np.ndarray, size: int = DEFAULT_IMAGE_SIZE) -> np.ndarray:
    """Nodal lines as a boolean mask: sampled pixels whose sign differs from the right or upper neighbour."""
    field = vertex_field_image(mesh, values, size)
    inside = np.isfinite(field)
    sign = np.sign(np.where(inside, field, 0.0))
    nodal = inside & (sign == 0.0)
    nodal[:, :-1] |= (sign[:, :-1] * sign[:, 1:] < 0) & inside[:, :-1] & inside[:, 1:]
    nodal[:-1, :] |= (sign[:-1, :] * sign[1:, :] < 0) & inside[:-1, :] & inside[1:, :]
    return nodal


def triangle_field_image(mesh: TriMesh, values: np.ndarray, size: int = DEFAULT_IMAGE_SIZE) -> np.ndarray:
    """Piecewise-constant field; pixel-split meshes show the sum of a pixel's two triangles."""
    values = np.asarray(values, dtype=float)
    if mesh.raster is not None and mesh.n_triangles == 2 * mesh.raster.filled_count:
        image = np.full(mesh.raster.bits.shape, np.nan)
        image[mesh.raster.bits] = values[0::2] + values[1::2]
        return image
    gx, gy = _sample_points(mesh, size)
    tri = Triangulation(mesh.vertices[:, 0], mesh.vertices[:, 1], mesh.triangles)
    idx = tri.get_trifinder()(gx, gy)
    image = np.full(gx.shape, np.nan)
    inside = idx >= 0
    image[inside] = values[idx[inside]]
    return image


# ---------------------------------------------------------------------------
# Plots
# ---------------------------------------------------------------------------


def plot_counting(path: str, series: CountingSeries, title: str = "") -> str:
    """Three panels: N(t) against the Weyl term, D1(t) and D2(t)."""
    fig, axes = plt.subplots(1, 3, figsize=(13, 4))
    try:
        axes[0].step(series.t, series.N, where="post", label="N(t)")
        axes[0].plot(series.t, series.weyl, "--", label="A t / 4π")
        if series.weyl2 is not None:
            axes[0].plot(series.t, series.weyl2, ":", label="two-term Weyl")
        axes[0].legend()
        axes[1].plot(series.t, series.D1)
        axes[1].set_title("D1")
        axes[2].plot(series.t, series.D2)
        axes[2].set_title(f"D2 (β = {series.beta:.4f})")
        for ax in axes:
            ax.set_xlabel("t")
        if title:
            fig.suptitle(title)
        fig.tight_layout()
        buf = io.BytesIO()
        fig.savefig(buf, format="png", dpi=100, metadata={"Software": None})
    finally:
        plt.close(fig)
    return _atomic_write(path, buf.getvalue())
