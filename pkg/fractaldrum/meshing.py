"""
meshing.py — Conforming triangle meshes for snowflakes and Julia rasters.

Two strategies:

* classic snowflake: exact triangular-lattice triangulation. The level-m
  domain is a union of lattice triangles of side 3^-m, built level by level
  in integer lattice coordinates (split every triangle into 9, glue one
  bump triangle on the middle third of every boundary edge).
* quadratic snowflakes and Julia sets: pixel split. Every filled pixel
  becomes two right triangles along its lower-left to upper-right diagonal.
  Quadratic polygons off the pixel lattice get extra grid lines through
  their vertex coordinates.

``refine`` performs regular 1 -> 4 midpoint subdivision.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Optional, Tuple

import numpy as np
from matplotlib.path import Path
from scipy.spatial import cKDTree

from fractaldrum.errors import BudgetExceededError, MeshError
from fractaldrum.geometry import Polygon, SnowflakeSpec, snowflake_polygon
from fractaldrum.julia import RasterGrid

DEFAULT_TRIANGLE_BUDGET = 5_000_000

_SQRT3_2 = math.sqrt(3.0) / 2.0


# ---------------------------------------------------------------------------
# Data model
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class TriMesh:
    """
    Attributes
    ----------
    vertices:
        (n, 2) float coordinates.
    triangles:
        (t, 3) vertex indices, counterclockwise.
    is_boundary:
        (n,) True for vertices on an edge used by exactly one triangle.
    h:
        characteristic edge length (lattice side or pixel size).
    raster:
        the pixel grid a pixel-split mesh was made from, else None.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    is_boundary: np.ndarray
    h: float
    raster: Optional[RasterGrid] = None

    @property
    def n_vertices(self) -> int:
        return int(self.vertices.shape[0])

    @property
    def n_triangles(self) -> int:
        return int(self.triangles.shape[0])

    def signed_areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def area(self) -> float:
        return float(self.signed_areas().sum())

    def centroids(self) -> np.ndarray:
        return self.vertices[self.triangles].mean(axis=1)

    def center_of_mass(self) -> np.ndarray:
        areas = self.signed_areas()
        return areas @ self.centroids() / areas.sum()

    @cached_property
    def edge_table(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(edges (E, 2) sorted pairs, triangles per edge (E,), triangle->edge map (t, 3))."""
        return _edge_table(self.triangles, self.n_vertices)

    def euler_characteristic(self) -> int:
        """V - E + T; equals 1 - H for a connected mesh with H holes."""
        edges, _, _ = self.edge_table
        return self.n_vertices - int(edges.shape[0]) + self.n_triangles

    @cached_property
    def fingerprint(self) -> str:
        digest = hashlib.blake2b(digest_size=16)
        digest.update(np.ascontiguousarray(self.vertices).tobytes())
        digest.update(np.ascontiguousarray(self.triangles).tobytes())
        return digest.hexdigest()

    def validate(self) -> "TriMesh":
        """Raise MeshError unless orientation, manifoldness and boundary flags hold."""
        if self.n_triangles == 0:
            raise MeshError("mesh has no triangles")
        if np.any(self.signed_areas() <= 0.0):
            raise MeshError("mesh has non-positively oriented triangles")
        edges, counts, _ = self.edge_table
        if np.any(counts > 2):
            raise MeshError("an edge is shared by more than two triangles")
        flags = np.zeros(self.n_vertices, dtype=bool)
        flags[edges[counts == 1].ravel()] = True
        if not np.array_equal(flags, self.is_boundary):
            raise MeshError("boundary flags disagree with the edge structure")
        # every boundary vertex sits on a closed boundary loop
        degree = np.bincount(edges[counts == 1].ravel(), minlength=self.n_vertices)
        if np.any(degree % 2):
            raise MeshError("boundary edges do not close up (hanging vertex)")
        scale = max(self.h, 1e-300)
        if cKDTree(self.vertices).query_pairs(1e-12 * max(1.0, scale), output_type="ndarray").size:
            raise MeshError("mesh has duplicate vertices")
        return self


# ---------------------------------------------------------------------------
# Internal helpers
# ---------------------------------------------------------------------------


def _edge_table(triangles: np.ndarray, n_vertices: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    local = triangles[:, [[0, 1], [1, 2], [2, 0]]]          # (t, 3, 2)
    lo = np.minimum(local[..., 0], local[..., 1])
    hi = np.maximum(local[..., 0], local[..., 1])
    keys = lo.astype(np.int64) * n_vertices + hi
    uniq, inverse, counts = np.unique(keys.ravel(), return_inverse=True, return_counts=True)
    edges = np.column_stack((uniq // n_vertices, uniq % n_vertices))
    return edges, counts, inverse.reshape(triangles.shape[0], 3)


def _boundary_flags(triangles: np.ndarray, n_vertices: int) -> np.ndarray:
    edges, counts, _ = _edge_table(triangles, n_vertices)
    flags = np.zeros(n_vertices, dtype=bool)
    flags[edges[counts == 1].ravel()] = True
    return flags


def _build(vertices: np.ndarray, triangles: np.ndarray, h: float,
           raster: Optional[RasterGrid] = None) -> TriMesh:
    triangles = np.ascontiguousarray(triangles, dtype=np.int64)
    return TriMesh(
        vertices=np.ascontiguousarray(vertices, dtype=float),
        triangles=triangles,
        is_boundary=_boundary_flags(triangles, vertices.shape[0]),
        h=h,
        raster=raster,
    )


def _check_budget(requested: int, budget: int) -> None:
    if requested > budget:
        raise BudgetExceededError("triangles", requested, budget)


# ---------------------------------------------------------------------------
# Classic snowflake: exact lattice triangulation
# ---------------------------------------------------------------------------

# Sub-triangle corners of a triangle split into 9, as (a, b) coefficients of
# the two scaled edge vectors: six "up" and three "down" triangles.
_UP = [(a, b) for b in range(3) for a in range(3 - b)]
_DOWN = [(a, b) for b in range(2) for a in range(2 - b)]
_SPLIT9 = np.array(
    [[(a, b), (a + 1, b), (a, b + 1)] for a, b in _UP]
    + [[(a + 1, b), (a + 1, b + 1), (a, b + 1)] for a, b in _DOWN],
    dtype=np.int64,
)                                                             # (9, 3, 2)


def _rotate_cw60(d: np.ndarray) -> np.ndarray:
    """Rotation by -60 degrees in lattice coordinates (i e1 + j e2)."""
    return np.column_stack((d[:, 0] + d[:, 1], -d[:, 0]))


def classic_lattice(level: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Integer lattice triangles (T, 3, 2) and boundary polygon (P, 2) of the
    level-m classic snowflake, lattice pitch 3^-m.
    """
    tris = np.array([[[0, 0], [1, 0], [0, 1]]], dtype=np.int64)
    poly = np.array([[0, 0], [1, 0], [0, 1]], dtype=np.int64)
    for _ in range(level):
        tris = 3 * tris
        p0 = tris[:, 0]
        u = (tris[:, 1] - p0) // 3
        v = (tris[:, 2] - p0) // 3
        split = (p0[:, None, None, :]
                 + _SPLIT9[None, :, :, 0, None] * u[:, None, None, :]
                 + _SPLIT9[None, :, :, 1, None] * v[:, None, None, :])
        split = split.reshape(-1, 3, 2)

        a = 3 * poly
        d = (np.roll(a, -1, axis=0) - a) // 3
        first = a + d
        apex = first + _rotate_cw60(d)
        second = a + 2 * d
        bumps = np.stack((first, apex, second), axis=1)
        tris = np.concatenate((split, bumps), axis=0)
        poly = np.stack((a, first, apex, second), axis=1).reshape(-1, 2)
    return tris, poly


def classic_triangle_count(level: int, refine_steps: int = 0) -> int:
    return (8 * 9 ** level - 3 * 4 ** level) // 5 * 4 ** refine_steps


def _lattice_to_xy(ij: np.ndarray, h: float) -> np.ndarray:
    ij = ij.astype(float)
    return np.column_stack((h * (ij[:, 0] + 0.5 * ij[:, 1]), h * _SQRT3_2 * ij[:, 1]))


def _mesh_classic(level: int) -> TriMesh:
    tris, _ = classic_lattice(level)
    corners = tris.reshape(-1, 2)
    lo = corners.min(axis=0)
    shifted = corners - lo
    base = int(shifted.max()) + 1
    uniq, inverse = np.unique(shifted[:, 0] * base + shifted[:, 1], return_inverse=True)
    ij = np.column_stack((uniq // base, uniq % base)) + lo
    h = 3.0 ** (-level)
    return _build(_lattice_to_xy(ij, h), inverse.reshape(-1, 3), h)


# ---------------------------------------------------------------------------
# Pixel split
# ---------------------------------------------------------------------------


def mesh_from_raster(grid: RasterGrid, triangle_budget: int = DEFAULT_TRIANGLE_BUDGET) -> TriMesh:
    """Two triangles per filled pixel, shared corners merged."""
    rows, cols = np.nonzero(grid.bits)
    if rows.size == 0:
        raise MeshError("raster has no filled pixels")
    _check_budget(2 * rows.size, triangle_budget)

    stride = grid.width + 1
    ll = rows.astype(np.int64) * stride + cols
    lr = ll + 1
    ul = ll + stride
    ur = ul + 1
    corner_ids = np.stack((np.column_stack((ll, lr, ur)), np.column_stack((ll, ur, ul))),
                          axis=1).reshape(-1, 3)

    used, inverse = np.unique(corner_ids.ravel(), return_inverse=True)
    h = grid.pixel_size
    xy = np.column_stack((grid.origin[0] + (used % stride) * h,
                          grid.origin[1] + (used // stride) * h))
    return _build(xy, inverse.reshape(-1, 3), h, raster=grid)


def rasterize_polygon(polygon: Polygon, pitch: float) -> RasterGrid:
    """
    Pixels of side ``pitch`` whose centre lies inside the polygon.

    Pixel edges sit on integer multiples of ``pitch`` and one empty pixel
    surrounds the polygon.
    """
    if not pitch > 0:
        raise MeshError(f"pitch must be > 0, got {pitch}")
    xmin, xmax, ymin, ymax = polygon.bounds()
    c0 = int(math.floor(xmin / pitch)) - 1
    r0 = int(math.floor(ymin / pitch)) - 1
    width = int(math.ceil(xmax / pitch)) + 1 - c0
    height = int(math.ceil(ymax / pitch)) + 1 - r0
    xs = (c0 + np.arange(width) + 0.5) * pitch
    ys = (r0 + np.arange(height) + 0.5) * pitch
    gx, gy = np.meshgrid(xs, ys)
    inside = Path(polygon.vertices, closed=False).contains_points(
        np.column_stack((gx.ravel(), gy.ravel()))
    )
    return RasterGrid(bits=inside.reshape(height, width), origin=(c0 * pitch, r0 * pitch),
                      pixel_size=pitch)


def mesh_polygon_raster(
    polygon: Polygon,
    pitch: float,
    triangle_budget: int = DEFAULT_TRIANGLE_BUDGET,
) -> TriMesh:
    xmin, xmax, ymin, ymax = polygon.bounds()
    # the bounding-box pixel count bounds the raster allocation
    _check_budget(int(((xmax - xmin) / pitch + 3) * ((ymax - ymin) / pitch + 3)), triangle_budget)
    return mesh_from_raster(rasterize_polygon(polygon, pitch), triangle_budget)


def _merged(values: np.ndarray, tol: float) -> np.ndarray:
    values = np.sort(np.asarray(values, dtype=float))
    return values[np.concatenate(([True], np.diff(values) > tol))]


def _grid_lines(coords: np.ndarray, pitch: float) -> Tuple[np.ndarray, bool]:
    """
    Polygon coordinates plus the multiples of ``pitch`` that keep at least
    pitch / 4 away from them; the flag says whether every coordinate already
    is a multiple of ``pitch``.
    """
    exact = _merged(coords, 1e-9 * pitch)
    k = np.arange(math.floor(exact[0] / pitch), math.ceil(exact[-1] / pitch) + 1)
    uniform = k * pitch
    aligned = bool(np.all(np.abs(exact / pitch - np.rint(exact / pitch)) <= 1e-9))
    pos = np.clip(np.searchsorted(exact, uniform), 1, exact.size - 1)
    gap = np.minimum(np.abs(uniform - exact[pos - 1]), np.abs(uniform - exact[pos]))
    return np.union1d(exact, uniform[gap >= 0.25 * pitch]), aligned


def mesh_rectilinear(
    polygon: Polygon,
    pitch: float,
    triangle_budget: int = DEFAULT_TRIANGLE_BUDGET,
) -> TriMesh:
    """
    Exact mesh of an axis-parallel polygon.

    Cells come from a tensor grid whose lines are every vertex coordinate plus
    a uniform pitch, so each cell lies wholly inside or outside. When every
    vertex sits on the pitch lattice this is the pixel split of
    ``mesh_polygon_raster``.
    """
    if not pitch > 0:
        raise MeshError(f"pitch must be > 0, got {pitch}")
    d = np.roll(polygon.vertices, -1, axis=0) - polygon.vertices
    if np.any(np.min(np.abs(d), axis=1) > 1e-12 * max(1.0, float(np.abs(d).max()))):
        raise MeshError("mesh_rectilinear needs a polygon with axis-parallel edges")
    xs, x_aligned = _grid_lines(polygon.vertices[:, 0], pitch)
    ys, y_aligned = _grid_lines(polygon.vertices[:, 1], pitch)
    if x_aligned and y_aligned:
        return mesh_polygon_raster(polygon, pitch, triangle_budget)
    _check_budget(2 * (xs.size - 1) * (ys.size - 1), triangle_budget)

    cx = 0.5 * (xs[1:] + xs[:-1])
    cy = 0.5 * (ys[1:] + ys[:-1])
    gx, gy = np.meshgrid(cx, cy)
    inside = Path(polygon.vertices, closed=False).contains_points(
        np.column_stack((gx.ravel(), gy.ravel()))
    ).reshape(gx.shape)
    rows, cols = np.nonzero(inside)
    if rows.size == 0:
        raise MeshError("polygon covers no grid cell")

    stride = xs.size
    ll = rows.astype(np.int64) * stride + cols
    lr = ll + 1
    ul = ll + stride
    ur = ul + 1
    corner_ids = np.stack((np.column_stack((ll, lr, ur)), np.column_stack((ll, ur, ul))),
                          axis=1).reshape(-1, 3)
    used, inverse = np.unique(corner_ids.ravel(), return_inverse=True)
    xy = np.column_stack((xs[used % stride], ys[used // stride]))
    return _build(xy, inverse.reshape(-1, 3), pitch)


# ---------------------------------------------------------------------------
# Refinement and snowflake entry point
# ---------------------------------------------------------------------------


def refine(mesh: TriMesh, triangle_budget: int = DEFAULT_TRIANGLE_BUDGET) -> TriMesh:
    """Split every triangle into 4 at its edge midpoints."""
    _check_budget(4 * mesh.n_triangles, triangle_budget)
    edges, _, tri_edges = mesh.edge_table
    n = mesh.n_vertices
    midpoints = 0.5 * (mesh.vertices[edges[:, 0]] + mesh.vertices[edges[:, 1]])
    vertices = np.concatenate((mesh.vertices, midpoints), axis=0)

    i, j, k = mesh.triangles.T
    ij, jk, ki = (tri_edges + n).T
    tris = np.stack((
        np.column_stack((i, ij, ki)),
        np.column_stack((j, jk, ij)),
        np.column_stack((k, ki, jk)),
        np.column_stack((ij, jk, ki)),
    ), axis=1).reshape(-1, 3)
    return _build(vertices, tris, 0.5 * mesh.h)


def mesh_snowflake(
    spec: SnowflakeSpec,
    refine_steps: int = 0,
    triangle_budget: int = DEFAULT_TRIANGLE_BUDGET,
) -> TriMesh:
    """
    Classic: lattice triangulation at side 3^-m, then ``refine_steps`` 1->4
    subdivisions. Quadratic: rectilinear mesh at pitch b^m / 2^refine_steps,
    a plain pixel split when the polygon lies on that pitch.
    """
    spec.validate()
    if refine_steps < 0:
        raise MeshError(f"refine_steps must be >= 0, got {refine_steps}")
    if spec.kind == "classic":
        _check_budget(classic_triangle_count(spec.level, refine_steps), triangle_budget)
        mesh = _mesh_classic(spec.level)
        for _ in range(refine_steps):
            mesh = refine(mesh, triangle_budget)
        return mesh
    pitch = spec.b ** spec.level / 2 ** refine_steps
    return mesh_rectilinear(snowflake_polygon(spec), pitch, triangle_budget)
